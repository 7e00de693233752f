//! Scoring passages against references, ranking, and nCG curves.

mod measure;
mod ncg;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use measure::{valid_measure_names, Family, Measure, MeasureId};
pub use ncg::{ncg_curve, rank, Cutoff, NcgCurve, ScoredPassage, TieBreak};

use crate::discrete::{f1, logsim, rouge_n, BackgroundModel, KlScorer};
use crate::embeddings::{cosine, doc_vector, DocVector, EmbeddingStore, UnitForm};
use crate::reference::{
    assign_folds, build_interestingness_reference, build_topic_reference, fold_complement_sources,
    topic_reference_sources, FoldAssignment, Reference, DEFAULT_FOLDS,
};
use crate::textproc::{unit_sequence, AnalyzedPool, Granularity, SkipMode, UnitKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Against the topic's own informative passages.
    Informativeness,
    /// Against informative passages of topics in other folds.
    Interestingness,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Informativeness => "informativeness",
            Mode::Interestingness => "interestingness",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "informativeness" | "inf" => Ok(Mode::Informativeness),
            "interestingness" | "int" => Ok(Mode::Interestingness),
            _ => Err(Error::InvalidConfig(format!(
                "unknown mode `{s}`; expected informativeness or interestingness"
            ))),
        }
    }
}

/// Expands measure names into ids. A family name (`F1`, `KL`, `LS`, `ROUGE`)
/// stands for that family over every listed granularity; with
/// `entity_siblings` each bag measure also gets its anchor-restricted twin.
pub fn expand_measures<S: AsRef<str>>(
    names: &[S],
    units: &[Granularity],
    entity_siblings: bool,
) -> Result<Vec<MeasureId>> {
    let mut out = Vec::new();
    for name in names {
        let name = name.as_ref().trim();
        let family = match name.to_ascii_uppercase().as_str() {
            "F1" => Some(Family::F1),
            "KL" => Some(Family::Kl),
            "LS" | "LOGSIM" => Some(Family::LogSim),
            "ROUGE" => Some(Family::Rouge),
            _ => None,
        };
        match family {
            Some(f) => out.extend(units.iter().filter_map(|&g| Measure::of(f, g)).map(MeasureId::full)),
            None => out.push(name.parse()?),
        }
    }
    if entity_siblings {
        let restricted: Vec<_> = out
            .iter()
            .filter(|m| !m.entity_restricted && m.measure.supports_entity_restriction())
            .map(|m| MeasureId {
                entity_restricted: true,
                ..*m
            })
            .collect();
        out.extend(restricted);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Embedding stores by the measure that uses them.
#[derive(Debug, Default)]
pub struct StoreRegistry {
    stores: HashMap<Measure, EmbeddingStore>,
}

impl StoreRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, measure: Measure, store: EmbeddingStore) -> Result<()> {
        if measure.family() != Family::Embedding {
            return Err(Error::InvalidConfig(format!("{measure} does not use an embedding store")));
        }
        if Some(store.granularity()) != measure.granularity() {
            return Err(Error::InvalidConfig(format!(
                "{measure} needs a {} store, got {}",
                measure.granularity().unwrap_or_default(),
                store.granularity()
            )));
        }
        self.stores.insert(measure, store);
        Ok(())
    }

    pub fn get(&self, measure: Measure) -> Result<&EmbeddingStore> {
        self.stores
            .get(&measure)
            .ok_or_else(|| Error::MissingStore(measure.to_string()))
    }
}

/// Passages sharing a reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Group {
    Topic(String),
    Fold(usize),
}

/// Builds and caches references per (group, unit kind) for one mode.
pub struct ReferenceProvider<'p, 'a> {
    analyzed: &'p AnalyzedPool<'a>,
    mode: Mode,
    folds: Option<FoldAssignment>,
    references: Mutex<HashMap<(Group, UnitKind), Option<Arc<Reference>>>>,
    backgrounds: Mutex<HashMap<UnitKind, Arc<BackgroundModel>>>,
}

impl<'p, 'a> ReferenceProvider<'p, 'a> {
    pub fn informativeness(analyzed: &'p AnalyzedPool<'a>) -> Self {
        Self::new(analyzed, Mode::Informativeness, None)
    }

    pub fn interestingness(analyzed: &'p AnalyzedPool<'a>, folds: FoldAssignment) -> Self {
        Self::new(analyzed, Mode::Interestingness, Some(folds))
    }

    fn new(analyzed: &'p AnalyzedPool<'a>, mode: Mode, folds: Option<FoldAssignment>) -> Self {
        ReferenceProvider {
            analyzed,
            mode,
            folds,
            references: Mutex::default(),
            backgrounds: Mutex::default(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn folds(&self) -> Option<&FoldAssignment> {
        self.folds.as_ref()
    }

    fn group_of(&self, topic_id: &str) -> Result<Group> {
        match &self.folds {
            None => Ok(Group::Topic(topic_id.to_string())),
            Some(f) => f
                .fold_of(topic_id)
                .map(Group::Fold)
                .ok_or_else(|| Error::NoSuchTopic(topic_id.to_string())),
        }
    }

    /// Reference for the passages of `topic_id`; `None` when it would be empty.
    pub fn reference(&self, topic_id: &str, kind: UnitKind) -> Result<Option<Arc<Reference>>> {
        let group = self.group_of(topic_id)?;
        let key = (group, kind);
        if let Some(hit) = self.references.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let built = match &self.folds {
            None => build_topic_reference(self.analyzed, topic_id, kind),
            Some(folds) => build_interestingness_reference(self.analyzed, topic_id, folds, kind),
        };
        let value = match built {
            Ok(r) => Some(Arc::new(r)),
            Err(Error::EmptyReference(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(self.references.lock().unwrap().entry(key).or_insert(value).clone())
    }

    /// Source passages of the reference for `topic_id`, ordered by passage id.
    pub fn sources(&self, topic_id: &str) -> Result<Vec<usize>> {
        match (&self.folds, self.group_of(topic_id)?) {
            (Some(folds), Group::Fold(f)) => fold_complement_sources(self.analyzed.pool(), f, folds),
            _ => topic_reference_sources(self.analyzed.pool(), topic_id),
        }
    }

    /// Unit distribution of the whole pool for `kind`.
    pub fn background(&self, kind: UnitKind) -> Arc<BackgroundModel> {
        if let Some(bg) = self.backgrounds.lock().unwrap().get(&kind) {
            return bg.clone();
        }
        let bg = Arc::new(BackgroundModel::from_bags(self.analyzed.bags(kind)));
        self.backgrounds.lock().unwrap().entry(kind).or_insert(bg).clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoringOptions {
    /// KL only: passages with fewer preprocessed tokens rank last.
    pub kl_min_len: Option<usize>,
}

fn store_units(analyzed: &AnalyzedPool<'_>, index: usize, store: &EmbeddingStore) -> Vec<String> {
    let terms = match store.form() {
        UnitForm::Stemmed => analyzed.terms(index, false),
        UnitForm::Surface => analyzed.surface_terms(index),
    };
    unit_sequence(terms, store.granularity(), SkipMode::Inclusive)
}

/// Scores every passage whose reference is non-empty. Output follows pool order.
pub fn score_pool(
    analyzed: &AnalyzedPool<'_>,
    measure: MeasureId,
    provider: &ReferenceProvider<'_, '_>,
    stores: &StoreRegistry,
    options: &ScoringOptions,
) -> Result<Vec<ScoredPassage>> {
    if measure.entity_restricted && !measure.measure.supports_entity_restriction() {
        return Err(Error::InvalidConfig(format!("{} cannot be restricted to entities", measure.measure)));
    }
    let passages = analyzed.pool().passages();
    let store = match measure.measure.family() {
        Family::Embedding => Some(stores.get(measure.measure)?),
        _ => None,
    };

    // Passages sharing a reference are scored together.
    let mut groups: BTreeMap<Group, (String, Vec<usize>)> = BTreeMap::new();
    for (i, p) in passages.iter().enumerate() {
        groups
            .entry(provider.group_of(&p.topic_id)?)
            .or_insert_with(|| (p.topic_id.clone(), Vec::new()))
            .1
            .push(i);
    }

    let groups: Vec<_> = groups.into_values().collect();
    let scored: Vec<Vec<(usize, f64)>> = groups
        .par_iter()
        .map(|(topic, members)| score_group(analyzed, measure, provider, store, options, topic, members))
        .collect::<Result<_>>()?;

    let mut flat: Vec<(usize, f64)> = scored.into_iter().flatten().collect();
    flat.sort_unstable_by_key(|&(i, _)| i);
    Ok(flat
        .into_iter()
        .map(|(i, value)| ScoredPassage {
            passage_id: passages[i].passage_id.clone(),
            topic_id: passages[i].topic_id.clone(),
            measure,
            value,
            ref_score: passages[i].ref_score,
        })
        .collect())
}

fn score_group(
    analyzed: &AnalyzedPool<'_>,
    measure: MeasureId,
    provider: &ReferenceProvider<'_, '_>,
    store: Option<&EmbeddingStore>,
    options: &ScoringOptions,
    topic: &str,
    members: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let family = measure.measure.family();
    if family == Family::LenInv {
        return Ok(members
            .iter()
            .map(|&i| {
                let n = analyzed.terms(i, false).len();
                (i, if n == 0 { 0.0 } else { 1.0 / n as f64 })
            })
            .collect());
    }

    if let Some(store) = store {
        let sources = provider.sources(topic)?;
        if sources.is_empty() {
            warn!("{measure}: empty reference for topic {topic}, skipping {} passages", members.len());
            return Ok(Vec::new());
        }
        let mut reference = DocVector::zeros(store.dim());
        for &s in &sources {
            reference.add(&doc_vector(&store_units(analyzed, s, store), store));
        }
        return members
            .iter()
            .map(|&i| {
                let doc = doc_vector(&store_units(analyzed, i, store), store);
                Ok((i, cosine(&doc, &reference)?.value))
            })
            .collect();
    }

    let kind = measure.unit_kind().expect("bag measures have a granularity");
    let Some(reference) = provider.reference(topic, kind)? else {
        warn!("{measure}: empty reference for topic {topic}, skipping {} passages", members.len());
        return Ok(Vec::new());
    };
    let background = provider.background(kind);
    let kl = match family {
        Family::Kl => Some(KlScorer::new(&reference.bag, &background)?),
        _ => None,
    };
    members
        .iter()
        .map(|&i| {
            let bag = analyzed.bag(i, kind);
            let value = match family {
                Family::F1 => f1(bag, &reference.bag)?.value,
                Family::LogSim => logsim(bag, &reference.bag)?.value,
                Family::Rouge => rouge_n(bag, &reference.bag)?.value,
                Family::Kl => {
                    let too_short = options
                        .kl_min_len
                        .is_some_and(|min| analyzed.terms(i, kind.entity_restricted).len() < min);
                    if too_short {
                        f64::INFINITY
                    } else {
                        kl.as_ref().unwrap().score(&reference.bag, bag, &background)?.value
                    }
                }
                Family::Embedding | Family::LenInv => unreachable!(),
            };
            Ok((i, value))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub measures: Vec<MeasureId>,
    pub cutoffs: Vec<Cutoff>,
    pub fold_count: usize,
    pub seed: u64,
    pub tie_break: TieBreak,
    pub scoring: ScoringOptions,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            measures: Measure::DISCRETE.into_iter().map(MeasureId::full).collect(),
            cutoffs: Cutoff::default_grid(),
            fold_count: DEFAULT_FOLDS,
            seed: 0,
            tie_break: TieBreak::PassageId,
            scoring: ScoringOptions::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::InvalidConfig("no measures selected".into()));
        }
        for m in &self.measures {
            if m.entity_restricted && !m.measure.supports_entity_restriction() {
                return Err(Error::InvalidConfig(format!("{} cannot be restricted to entities", m.measure)));
            }
        }
        Cutoff::validate_grid(&self.cutoffs)
    }
}

#[derive(Debug, Clone)]
pub struct MeasureRun {
    pub measure: MeasureId,
    /// Passages in pool order.
    pub scores: Vec<ScoredPassage>,
    pub curve: NcgCurve,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub mode: Mode,
    pub folds: Option<FoldAssignment>,
    /// One run per measure, ordered by [`MeasureId`].
    pub runs: Vec<MeasureRun>,
}

impl Experiment {
    pub fn curves(&self) -> impl Iterator<Item = &NcgCurve> {
        self.runs.iter().map(|r| &r.curve)
    }
}

/// Scores, ranks and builds a curve for every configured measure.
pub fn run_experiment(
    analyzed: &AnalyzedPool<'_>,
    config: &EvalConfig,
    mode: Mode,
    stores: &StoreRegistry,
) -> Result<Experiment> {
    config.validate()?;
    let provider = match mode {
        Mode::Informativeness => ReferenceProvider::informativeness(analyzed),
        Mode::Interestingness => {
            ReferenceProvider::interestingness(analyzed, assign_folds(analyzed.pool(), config.fold_count, config.seed)?)
        }
    };
    let mut measures = config.measures.clone();
    measures.sort();
    measures.dedup();

    let mut runs = Vec::with_capacity(measures.len());
    for measure in measures {
        let scores = score_pool(analyzed, measure, &provider, stores, &config.scoring)?;
        let ranked = rank(scores.clone(), config.tie_break)?;
        let curve = ncg_curve(&ranked, &config.cutoffs, measure, mode);
        runs.push(MeasureRun { measure, scores, curve });
    }
    Ok(Experiment {
        mode,
        folds: provider.folds().cloned(),
        runs,
    })
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// `measure,mode,unit_kind,entity_restricted,k,ncg`, six decimals.
pub fn write_curves_csv<'c, W: Write>(curves: impl IntoIterator<Item = &'c NcgCurve>, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["measure", "mode", "unit_kind", "entity_restricted", "k", "ncg"])?;
    for curve in curves {
        let unit = curve.measure.measure.granularity().map_or("none", Granularity::name);
        let restricted = if curve.measure.entity_restricted { "true" } else { "false" };
        for &(k, ncg) in &curve.points {
            w.write_record([
                curve.measure.measure.name(),
                curve.mode.name(),
                unit,
                restricted,
                &k.to_string(),
                &format!("{ncg:.6}"),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `measure,passage_id,topic_id,value,ref_score`. Restricted measures carry an `:ent` suffix.
pub fn write_scores_csv<'s, W: Write>(runs: impl IntoIterator<Item = &'s MeasureRun>, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["measure", "passage_id", "topic_id", "value", "ref_score"])?;
    for run in runs {
        let name = run.measure.to_string();
        for s in &run.scores {
            w.write_record([
                name.as_str(),
                &s.passage_id,
                &s.topic_id,
                &s.value.to_string(),
                &s.ref_score.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Passage, Pool, Topic};
    use crate::textproc::{Analyzer, Stoplist};

    fn pool() -> Pool {
        let topics = ["t1", "t2"]
            .iter()
            .map(|t| Topic {
                topic_id: t.to_string(),
                text: "tweet".into(),
            })
            .collect();
        let passages = [
            ("p1", "t1", "alpha beta gamma delta", 1.0),
            ("p2", "t1", "zeta eta", 0.0),
            ("p3", "t2", "beta theta", 2.0),
            ("p4", "t2", "alpha", 0.0),
        ]
        .iter()
        .map(|&(id, t, text, s)| Passage {
            passage_id: id.into(),
            topic_id: t.into(),
            text: text.into(),
            ref_score: s,
            anchors: vec![],
        })
        .collect();
        Pool::new(topics, passages, "").unwrap()
    }

    fn analyzed(p: &Pool) -> AnalyzedPool<'_> {
        AnalyzedPool::new(p, Analyzer::new(Stoplist::empty(), SkipMode::Inclusive))
    }

    #[test]
    fn len_inv_and_identity() {
        let p = pool();
        let a = analyzed(&p);
        let provider = ReferenceProvider::informativeness(&a);
        let s = score_pool(&a, MeasureId::full(Measure::LenInv), &provider, &StoreRegistry::new(), &Default::default())
            .unwrap();
        assert_eq!(s[0].value, 0.25);
        let f = score_pool(&a, MeasureId::full(Measure::F1Uni), &provider, &StoreRegistry::new(), &Default::default())
            .unwrap();
        // p1 is the only informative passage of t1, so it is its own reference.
        assert_eq!(f[0].value, 1.0);
        assert_eq!(f.len(), 4);
    }

    #[test]
    fn missing_store_is_an_error() {
        let p = pool();
        let a = analyzed(&p);
        let provider = ReferenceProvider::informativeness(&a);
        let r = score_pool(&a, MeasureId::full(Measure::W2vClef), &provider, &StoreRegistry::new(), &Default::default());
        assert!(matches!(r, Err(Error::MissingStore(_))));
    }

    #[test]
    fn kl_min_length_ranks_short_passages_last() {
        let p = pool();
        let a = analyzed(&p);
        let provider = ReferenceProvider::informativeness(&a);
        let opts = ScoringOptions { kl_min_len: Some(2) };
        let s = score_pool(&a, MeasureId::full(Measure::KlUni), &provider, &StoreRegistry::new(), &opts).unwrap();
        assert_eq!(s[3].value, f64::INFINITY);
        assert!(s[0].value.is_finite());
    }

    #[test]
    fn expand_measure_families() {
        let all = expand_measures(&["F1", "LEN_INV"], &Granularity::ALL, false).unwrap();
        assert_eq!(all.len(), 4);
        let bi = expand_measures(&["ROUGE", "KL"], &[Granularity::SkipGap1], true).unwrap();
        assert_eq!(bi.iter().map(|m| m.to_string()).collect::<Vec<_>>(), ["KL_sk", "KL_sk:ent"]);
        assert!(expand_measures(&["NOPE"], &Granularity::ALL, false).is_err());
    }

    #[test]
    fn experiment_outputs_csv() {
        let p = pool();
        let a = analyzed(&p);
        let config = EvalConfig {
            measures: vec![MeasureId::full(Measure::LenInv), MeasureId::full(Measure::F1Uni)],
            cutoffs: vec![Cutoff::At(1), Cutoff::All],
            ..Default::default()
        };
        let exp = run_experiment(&a, &config, Mode::Informativeness, &StoreRegistry::new()).unwrap();
        assert_eq!(exp.runs.len(), 2);
        assert_eq!(exp.runs[0].measure.measure, Measure::F1Uni);
        let mut buf = Vec::new();
        write_curves_csv(exp.curves(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("measure,mode,unit_kind,entity_restricted,k,ncg\n"));
        assert!(text.contains("LEN_INV,informativeness,none,false,4,1.000000\n"));
        assert!(!text.contains('\r'));

        let mut buf = Vec::new();
        write_scores_csv(&exp.runs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("measure,passage_id,topic_id,value,ref_score\nF1_1,p1,t1,1,1\n"));
    }
}
