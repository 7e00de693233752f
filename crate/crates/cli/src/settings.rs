//! Resolution of `eval` settings from flags, environment, a key=value file
//! and built-in defaults, in that order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use passage_eval::corpus::DedupScope;
use passage_eval::embeddings::{StoreOptions, UnitForm, VectorFormat};
use passage_eval::evaluation::{expand_measures, Cutoff, Measure, MeasureId, Mode, TieBreak};
use passage_eval::reference::DEFAULT_FOLDS;
use passage_eval::textproc::{Granularity, SkipMode};

/// A configuration problem the user can fix; exits with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

/// `key = value` lines; `#` starts a comment.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

pub const KEYS: [&str; 16] = [
    "passages", "topics", "mode", "measures", "units", "cutoffs", "folds", "seed", "entity_restricted", "tie",
    "min_len", "stoplist", "dedup", "skip", "vectors", "out",
];

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
            let k = k.trim().to_ascii_lowercase().replace('-', "_");
            if !KEYS.contains(&k.as_str()) {
                return Err(usage(format!(
                    "{}:{}: unknown key `{k}`; valid keys: {}",
                    path.display(),
                    n + 1,
                    KEYS.join(", ")
                )));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(ConfigFile {
            path: Some(path.to_path_buf()),
            values,
        })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Parses `key` from the file, mentioning the file in any error.
    fn parse<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                parse(v).map_err(|e| {
                    let path = self.path.as_deref().unwrap_or(Path::new("<config>"));
                    usage(format!("{}: {key}: {e:#}", path.display()))
                })
            })
            .transpose()
    }
}

/// `MEASURE=PATH[:binary|text][:stem|surface][:underscore]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VectorSpec {
    pub measure: Measure,
    pub path: PathBuf,
    #[serde(skip)]
    pub format: VectorFormat,
    #[serde(skip)]
    pub form: UnitForm,
    pub underscore_pairs: bool,
}

impl VectorSpec {
    pub fn options(&self) -> StoreOptions {
        StoreOptions {
            format: self.format,
            granularity: self.measure.granularity().unwrap_or_default(),
            form: self.form,
            underscore_pairs: self.underscore_pairs,
        }
    }
}

impl FromStr for VectorSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (measure, rest) = s
            .split_once('=')
            .ok_or_else(|| format!("expected MEASURE=PATH[:options], got `{s}`"))?;
        let measure: Measure = measure.trim().parse().map_err(|e| format!("{e}"))?;
        let mut path = rest;
        let (mut format, mut form, mut underscore_pairs) = (VectorFormat::Text, UnitForm::Stemmed, false);
        // Options are peeled off the right so paths may contain colons.
        while let Some((head, opt)) = path.rsplit_once(':') {
            match opt.to_ascii_lowercase().as_str() {
                "binary" | "bin" => format = VectorFormat::Binary,
                "text" | "txt" => format = VectorFormat::Text,
                "stem" | "stemmed" => form = UnitForm::Stemmed,
                "surface" => form = UnitForm::Surface,
                "underscore" => underscore_pairs = true,
                _ => break,
            }
            path = head;
        }
        if path.is_empty() {
            return Err(format!("missing path in `{s}`"));
        }
        Ok(VectorSpec {
            measure,
            path: path.into(),
            format,
            form,
            underscore_pairs,
        })
    }
}

impl fmt::Display for VectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.measure, self.path.display())?;
        f.write_str(match self.format {
            VectorFormat::Text => ":text",
            VectorFormat::Binary => ":binary",
        })?;
        f.write_str(match self.form {
            UnitForm::Stemmed => ":stem",
            UnitForm::Surface => ":surface",
        })?;
        if self.underscore_pairs {
            f.write_str(":underscore")?;
        }
        Ok(())
    }
}

/// Accepts a measure id (`F1_1`, `KL_sk:ent`) or a family name (`F1`, `KL`, `LS`, `ROUGE`).
pub fn parse_measure_token(s: &str) -> std::result::Result<String, String> {
    let s = s.trim();
    if matches!(s.to_ascii_uppercase().as_str(), "F1" | "KL" | "LS" | "LOGSIM" | "ROUGE") {
        return Ok(s.to_string());
    }
    s.parse::<MeasureId>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

pub fn parse_granularity(s: &str) -> std::result::Result<Granularity, String> {
    Granularity::parse(s).ok_or_else(|| format!("unknown unit kind `{s}`; expected unigram, bigram or skipgram"))
}

/// Duplicate removal scope; `None` keeps every passage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dedup(pub Option<DedupScope>);

pub fn parse_dedup(s: &str) -> std::result::Result<Dedup, String> {
    match s.to_ascii_lowercase().as_str() {
        "per-topic" | "per_topic" | "topic" => Ok(Dedup(Some(DedupScope::PerTopic))),
        "global" => Ok(Dedup(Some(DedupScope::Global))),
        "none" | "off" => Ok(Dedup(None)),
        _ => Err(format!("unknown dedup scope `{s}`; expected per-topic, global or none")),
    }
}

pub fn dedup_name(scope: Option<DedupScope>) -> &'static str {
    match scope {
        Some(DedupScope::PerTopic) => "per-topic",
        Some(DedupScope::Global) => "global",
        None => "none",
    }
}

pub fn parse_skip(s: &str) -> std::result::Result<SkipMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "inclusive" => Ok(SkipMode::Inclusive),
        "strict" => Ok(SkipMode::Strict),
        _ => Err(format!("unknown skip mode `{s}`; expected inclusive or strict")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tie {
    Id,
    Random,
}

pub fn parse_tie(s: &str) -> std::result::Result<Tie, String> {
    match s.to_ascii_lowercase().as_str() {
        "id" | "passage-id" | "passage_id" => Ok(Tie::Id),
        "random" => Ok(Tie::Random),
        _ => Err(format!("unknown tie-break `{s}`; expected id or random")),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn split_list(s: &str, sep: char) -> Vec<&str> {
    s.split(sep).map(str::trim).filter(|x| !x.is_empty()).collect()
}

/// Values given on the command line or through the environment.
#[derive(Debug, Default, Clone)]
pub struct EvalOverrides {
    pub passages: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub measures: Vec<String>,
    pub units: Vec<Granularity>,
    pub cutoffs: Option<String>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub entity_restricted: Option<bool>,
    pub tie: Option<Tie>,
    pub min_len: Option<usize>,
    pub stoplist: Option<String>,
    pub dedup: Option<Dedup>,
    pub skip: Option<SkipMode>,
    pub vectors: Vec<VectorSpec>,
    pub out: Option<PathBuf>,
}

/// Fully resolved `eval` settings.
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub passages: PathBuf,
    pub topics: PathBuf,
    pub mode: Mode,
    pub measure_tokens: Vec<String>,
    pub units: Vec<Granularity>,
    pub cutoffs: Vec<Cutoff>,
    pub folds: usize,
    pub seed: u64,
    pub entity_restricted: bool,
    pub tie: Tie,
    pub min_len: Option<usize>,
    /// `smart`, `none`, or a file path.
    pub stoplist: String,
    pub dedup: Option<DedupScope>,
    pub skip: SkipMode,
    pub vectors: Vec<VectorSpec>,
    pub out: PathBuf,
}

fn lift<T>(r: std::result::Result<T, String>) -> Result<T> {
    r.map_err(|e| anyhow!(e))
}

impl EvalSettings {
    pub fn resolve(o: EvalOverrides, file: &ConfigFile) -> Result<Self> {
        let passages = o
            .passages
            .or(file.parse("passages", |v| Ok(PathBuf::from(v)))?)
            .ok_or_else(|| usage("no passages file; pass --passages or set `passages` in the config"))?;
        let topics = o
            .topics
            .or(file.parse("topics", |v| Ok(PathBuf::from(v)))?)
            .ok_or_else(|| usage("no topics file; pass --topics or set `topics` in the config"))?;
        let out = o
            .out
            .or(file.parse("out", |v| Ok(PathBuf::from(v)))?)
            .ok_or_else(|| usage("no output directory; pass --out or set `out` in the config"))?;
        let mode = match o.mode {
            Some(m) => m,
            None => file.parse("mode", |v| Ok(v.parse::<Mode>()?))?.unwrap_or(Mode::Informativeness),
        };
        let measure_tokens = if o.measures.is_empty() {
            file.parse("measures", |v| {
                split_list(v, ',').into_iter().map(|m| lift(parse_measure_token(m))).collect()
            })?
            .unwrap_or_else(|| vec!["F1".into(), "KL".into(), "LS".into()])
        } else {
            o.measures
        };
        let units = if o.units.is_empty() {
            file.parse("units", |v| split_list(v, ',').into_iter().map(|u| lift(parse_granularity(u))).collect())?
                .unwrap_or_else(|| Granularity::ALL.to_vec())
        } else {
            o.units
        };
        let cutoffs = match o.cutoffs {
            Some(c) => Cutoff::parse_grid(&c).map_err(|e| usage(e.to_string()))?,
            None => file.parse("cutoffs", |v| Ok(Cutoff::parse_grid(v)?))?.unwrap_or_else(Cutoff::default_grid),
        };
        Cutoff::validate_grid(&cutoffs).map_err(|e| usage(e.to_string()))?;
        let folds = match o.folds {
            Some(f) => f,
            None => file.parse("folds", |v| Ok(v.parse()?))?.unwrap_or(DEFAULT_FOLDS),
        };
        let seed = match o.seed {
            Some(s) => s,
            None => file.parse("seed", |v| Ok(v.parse()?))?.unwrap_or(0),
        };
        let entity_restricted = match o.entity_restricted {
            Some(b) => b,
            None => file.parse("entity_restricted", |v| lift(parse_bool(v)))?.unwrap_or(false),
        };
        let tie = match o.tie {
            Some(t) => t,
            None => file.parse("tie", |v| lift(parse_tie(v)))?.unwrap_or(Tie::Id),
        };
        let min_len = match o.min_len {
            Some(m) => Some(m),
            None => file.parse("min_len", |v| {
                Ok(match v {
                    "" | "none" => None,
                    v => Some(v.parse()?),
                })
            })?
            .flatten(),
        };
        let stoplist = o
            .stoplist
            .or(file.get("stoplist").map(str::to_string))
            .unwrap_or_else(|| "smart".into());
        let dedup = match o.dedup {
            Some(d) => d.0,
            None => file
                .parse("dedup", |v| lift(parse_dedup(v)))?
                .map_or(Some(DedupScope::PerTopic), |d| d.0),
        };
        let skip = match o.skip {
            Some(s) => s,
            None => file.parse("skip", |v| lift(parse_skip(v)))?.unwrap_or_default(),
        };
        let vectors = if o.vectors.is_empty() {
            file.parse("vectors", |v| split_list(v, ';').into_iter().map(|s| lift(s.parse())).collect())?
                .unwrap_or_default()
        } else {
            o.vectors
        };
        let settings = EvalSettings {
            passages,
            topics,
            mode,
            measure_tokens,
            units,
            cutoffs,
            folds,
            seed,
            entity_restricted,
            tie,
            min_len,
            stoplist,
            dedup,
            skip,
            vectors,
            out,
        };
        settings.measures()?;
        Ok(settings)
    }

    pub fn measures(&self) -> Result<Vec<MeasureId>> {
        expand_measures(&self.measure_tokens, &self.units, self.entity_restricted).map_err(|e| usage(e.to_string()))
    }

    pub fn tie_break(&self) -> TieBreak {
        match self.tie {
            Tie::Id => TieBreak::PassageId,
            Tie::Random => TieBreak::Random { seed: self.seed },
        }
    }

    /// Every resolved setting as ordered `key → value` strings.
    pub fn snapshot(&self) -> BTreeMap<&'static str, String> {
        let join = |v: Vec<String>, sep: &str| v.join(sep);
        let mut m = BTreeMap::new();
        m.insert("passages", self.passages.display().to_string());
        m.insert("topics", self.topics.display().to_string());
        m.insert("mode", self.mode.name().to_string());
        m.insert("measures", self.measure_tokens.join(","));
        m.insert("units", join(self.units.iter().map(|u| u.name().to_string()).collect(), ","));
        m.insert("cutoffs", join(self.cutoffs.iter().map(Cutoff::to_string).collect(), ","));
        m.insert("folds", self.folds.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("entity_restricted", self.entity_restricted.to_string());
        m.insert(
            "tie",
            match self.tie {
                Tie::Id => "id",
                Tie::Random => "random",
            }
            .to_string(),
        );
        m.insert("min_len", self.min_len.map_or_else(|| "none".into(), |v| v.to_string()));
        m.insert("stoplist", self.stoplist.clone());
        m.insert("dedup", dedup_name(self.dedup).to_string());
        m.insert(
            "skip",
            match self.skip {
                SkipMode::Inclusive => "inclusive",
                SkipMode::Strict => "strict",
            }
            .to_string(),
        );
        m.insert("vectors", join(self.vectors.iter().map(VectorSpec::to_string).collect(), ";"));
        m
    }

    /// A config file that reproduces this run; `out` is left to the caller.
    pub fn to_conf(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.snapshot() {
            if k == "vectors" && v.is_empty() {
                continue;
            }
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_spec_parsing() {
        let v: VectorSpec = "W2V_c_bi=/data/vec:s.bin:binary:surface:underscore".parse().unwrap();
        assert_eq!(v.measure, Measure::W2vClefBi);
        assert_eq!(v.path, PathBuf::from("/data/vec:s.bin"));
        assert_eq!(v.format, VectorFormat::Binary);
        assert_eq!(v.form, UnitForm::Surface);
        assert!(v.underscore_pairs);
        assert_eq!(v.to_string().parse::<VectorSpec>().unwrap(), v);
        assert!("W2V_g".parse::<VectorSpec>().is_err());
        assert!("NOPE=x".parse::<VectorSpec>().is_err());
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let conf = dir.path().join("run.conf");
        std::fs::write(&conf, "passages = p.jsonl\ntopics = t.tsv\nout = o\nseed = 9\nfolds = 3 # comment\n").unwrap();
        let file = ConfigFile::load(&conf).unwrap();
        let s = EvalSettings::resolve(
            EvalOverrides {
                seed: Some(4),
                ..Default::default()
            },
            &file,
        )
        .unwrap();
        assert_eq!((s.seed, s.folds, s.mode), (4, 3, Mode::Informativeness));
        assert_eq!(s.measures().unwrap().len(), 9);

        let again = dir.path().join("again.conf");
        std::fs::write(&again, s.to_conf() + "out = o\n").unwrap();
        let t = EvalSettings::resolve(EvalOverrides::default(), &ConfigFile::load(&again).unwrap()).unwrap();
        assert_eq!(t.snapshot(), s.snapshot());
    }

    #[test]
    fn bad_file_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let conf = dir.path().join("bad.conf");
        std::fs::write(&conf, "sead = 1\n").unwrap();
        let err = ConfigFile::load(&conf).unwrap_err();
        assert!(err.downcast_ref::<Usage>().is_some());
    }
}
