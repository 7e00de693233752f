//! `passage-eval`: batch front-end for scoring passage pools and emitting nCG curves.
//!
//! Settings for `eval` resolve in the order flag > `PASSEVAL_*` environment
//! variable > `--config` file > built-in default. Exit status is 0 on
//! success, 1 on runtime failure and 2 on usage errors.

mod manifest;
mod settings;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use passage_eval::corpus::{self, DedupScope, Pool, PoolStats};
use passage_eval::embeddings::{load_store, StoreOptions, UnitForm, VectorFormat};
use passage_eval::evaluation::{
    run_experiment, write_curves_csv, write_scores_csv, EvalConfig, Mode, ScoringOptions, StoreRegistry,
};
use passage_eval::reference::{assign_folds, build_interestingness_reference, build_topic_reference, Reference};
use passage_eval::textproc::{AnalyzedPool, Analyzer, Granularity, SkipMode, Stoplist, UnitKind};
use passage_eval::{oracle, synth, Error as CoreError};

use manifest::{digest_file, RunManifest};
use settings::{
    parse_dedup, parse_granularity, parse_measure_token, parse_skip, parse_tie, usage, ConfigFile, Dedup, EvalOverrides,
    EvalSettings, Tie, Usage, VectorSpec,
};

#[derive(Debug, Parser)]
#[command(name = "passage-eval", version, about = "Score passage pools and compute nCG curves")]
struct Cli {
    /// Worker threads [default: number of processors]
    #[arg(long, global = true, env = "PASSEVAL_WORKERS")]
    workers: Option<usize>,

    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and deduplicate a pool, printing statistics as JSON
    Ingest(IngestArgs),
    /// Build or inspect textual references
    Reference {
        #[command(subcommand)]
        action: ReferenceCommand,
    },
    /// Inspect word-vector stores
    Vectors {
        #[command(subcommand)]
        action: VectorsCommand,
    },
    /// Score, rank and write nCG curves
    Eval(Box<EvalArgs>),
    /// Check the metrics against brute-force oracles
    Selftest(SelftestArgs),
    /// Write a deterministic synthetic pool
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct PoolArgs {
    /// Passages, one JSON object per line
    #[arg(long)]
    passages: PathBuf,
    /// Topics, `topic_id<TAB>text` per line
    #[arg(long)]
    topics: PathBuf,
    /// Duplicate removal: per-topic, global or none
    #[arg(long, default_value = "per-topic", value_parser = parse_dedup)]
    dedup: Dedup,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    /// Stopword list: `smart`, `none` or a file with one word per line
    #[arg(long, default_value = "smart")]
    stoplist: String,
    /// Skip-gram pairs: inclusive (distance 1 and 2) or strict (distance 2)
    #[arg(long, default_value = "inclusive", value_parser = parse_skip)]
    skip: SkipMode,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    pool: PoolArgs,
    /// Write the deduplicated pool here as passages.jsonl and topics.tsv
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ReferenceCommand {
    /// Write every topic's reference as JSON lines
    Build(ReferenceArgs),
    /// Print one topic's reference as `unit<TAB>count`, most frequent first
    Dump {
        #[command(flatten)]
        args: ReferenceArgs,
        /// Topic to print
        #[arg(long)]
        topic: String,
    },
}

#[derive(Debug, Args)]
struct ReferenceArgs {
    #[command(flatten)]
    pool: PoolArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// informativeness or interestingness
    #[arg(long, default_value = "informativeness", value_parser = parse_mode)]
    mode: Mode,
    /// Unit kinds, comma separated
    #[arg(long, value_delimiter = ',', default_value = "unigram", value_parser = parse_granularity)]
    units: Vec<Granularity>,
    /// Restrict units to anchor text
    #[arg(long)]
    entity_restricted: bool,
    /// Number of topic folds for interestingness
    #[arg(long, default_value_t = passage_eval::reference::DEFAULT_FOLDS)]
    folds: usize,
    /// Fold assignment seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum VectorsCommand {
    /// Print size, dimension and a sample of a vector file as JSON
    Inspect {
        path: PathBuf,
        /// text or binary
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: VectorFormat,
        /// Unit kind the vectors are keyed by
        #[arg(long, default_value = "unigram", value_parser = parse_granularity)]
        units: Granularity,
        /// Read `a_b` keys as pairs
        #[arg(long)]
        underscore: bool,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// key = value settings file, below flags and environment in precedence
    #[arg(long, env = "PASSEVAL_CONFIG")]
    config: Option<PathBuf>,
    /// Passages, one JSON object per line
    #[arg(long, env = "PASSEVAL_PASSAGES")]
    passages: Option<PathBuf>,
    /// Topics, `topic_id<TAB>text` per line
    #[arg(long, env = "PASSEVAL_TOPICS")]
    topics: Option<PathBuf>,
    /// informativeness or interestingness [default: informativeness]
    #[arg(long, env = "PASSEVAL_MODE", value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Measure ids or families (F1, KL, LS, ROUGE), comma separated [default: F1,KL,LS]
    #[arg(long, env = "PASSEVAL_MEASURES", value_delimiter = ',', value_parser = parse_measure_token)]
    measures: Vec<String>,
    /// Unit kinds families expand over [default: unigram,bigram,skipgram]
    #[arg(long, env = "PASSEVAL_UNITS", value_delimiter = ',', value_parser = parse_granularity)]
    units: Vec<Granularity>,
    /// Cut-off grid, e.g. `10,100,all` [default: 10,25,...,20000,all]
    #[arg(long, env = "PASSEVAL_CUTOFFS")]
    cutoffs: Option<String>,
    /// Topic folds for interestingness [default: 12]
    #[arg(long, env = "PASSEVAL_FOLDS")]
    folds: Option<usize>,
    /// Seed for fold assignment and random tie-breaking [default: 0]
    #[arg(long, env = "PASSEVAL_SEED")]
    seed: Option<u64>,
    /// Also run every bag measure restricted to anchor text
    #[arg(long, env = "PASSEVAL_ENTITY_RESTRICTED", num_args = 0..=1, default_missing_value = "true")]
    entity_restricted: Option<bool>,
    /// Tie-break: id or random [default: id]
    #[arg(long, env = "PASSEVAL_TIE", value_parser = parse_tie)]
    tie: Option<Tie>,
    /// KL only: passages with fewer terms rank last
    #[arg(long, env = "PASSEVAL_MIN_LEN")]
    min_len: Option<usize>,
    /// Stopword list: `smart`, `none` or a file [default: smart]
    #[arg(long, env = "PASSEVAL_STOPLIST")]
    stoplist: Option<String>,
    /// Duplicate removal: per-topic, global or none [default: per-topic]
    #[arg(long, env = "PASSEVAL_DEDUP", value_parser = parse_dedup)]
    dedup: Option<Dedup>,
    /// Skip-gram pairs: inclusive or strict [default: inclusive]
    #[arg(long, env = "PASSEVAL_SKIP", value_parser = parse_skip)]
    skip: Option<SkipMode>,
    /// Vector store for an embedding measure: MEASURE=PATH[:binary|text][:stem|surface][:underscore]
    #[arg(long)]
    vectors: Vec<VectorSpec>,
    /// Output directory
    #[arg(long, env = "PASSEVAL_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    /// Random cases per check
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 6)]
    topics: usize,
    #[arg(long, default_value_t = 120)]
    passages: usize,
    /// Shared vocabulary size
    #[arg(long, default_value_t = 400)]
    vocab: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for passages.jsonl and topics.tsv
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: CoreError| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<VectorFormat, String> {
    VectorFormat::parse(s).ok_or_else(|| format!("unknown vector format `{s}`; expected text or binary"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // The reader went away, e.g. `| head`.
        Err(err) if broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_status(&err))
        }
    }
}

fn broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<serde_json::Error>().and_then(|e| e.io_error_kind()) == Some(std::io::ErrorKind::BrokenPipe)
    })
}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::InvalidConfig(_)
                | CoreError::FoldCount { .. }
                | CoreError::MissingStore(_)
                | CoreError::NoSuchTopic(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Reference { action } => reference(action),
        Command::Vectors {
            action: VectorsCommand::Inspect {
                path,
                format,
                units,
                underscore,
            },
        } => inspect_vectors(&path, format, units, underscore),
        Command::Eval(args) => eval(*args),
        Command::Selftest(args) => selftest(args),
        Command::Synth(args) => synthesize(args),
    }
}

fn load(passages: &Path, topics: &Path, dedup: Option<DedupScope>) -> Result<Pool> {
    let pool = corpus::load_pool(passages, topics)?;
    Ok(match dedup {
        Some(scope) => {
            let before = pool.passages().len();
            let kept = corpus::dedup(&pool, scope);
            info!("dedup removed {} of {before} passages", before - kept.passages().len());
            kept
        }
        None => pool,
    })
}

fn stoplist(spec: &str) -> Result<Stoplist> {
    Ok(match spec {
        "smart" => Stoplist::smart(),
        "none" => Stoplist::empty(),
        path => Stoplist::load(Path::new(path))?,
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct IngestReport {
    input: PoolStats,
    duplicates_removed: usize,
    output: PoolStats,
}

fn ingest(args: IngestArgs) -> Result<()> {
    let raw = corpus::load_pool(&args.pool.passages, &args.pool.topics)?;
    let kept = match args.pool.dedup.0 {
        Some(scope) => corpus::dedup(&raw, scope),
        None => raw.clone(),
    };
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        corpus::save_pool(&kept, &dir.join("passages.jsonl"), &dir.join("topics.tsv"))?;
    }
    print_json(&IngestReport {
        input: corpus::pool_stats(&raw),
        duplicates_removed: raw.passages().len() - kept.passages().len(),
        output: corpus::pool_stats(&kept),
    })
}

#[derive(Serialize)]
struct ReferenceRecord<'r> {
    topic_id: &'r str,
    mode: Mode,
    unit_kind: &'static str,
    entity_restricted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    excluded_fold: Option<usize>,
    total_len: u64,
    sources: &'r [String],
    units: BTreeMap<&'r str, u64>,
}

fn reference(action: ReferenceCommand) -> Result<()> {
    let (args, only) = match action {
        ReferenceCommand::Build(args) => (args, None),
        ReferenceCommand::Dump { args, topic } => (args, Some(topic)),
    };
    let pool = load(&args.pool.passages, &args.pool.topics, args.pool.dedup.0)?;
    if let Some(t) = &only {
        if pool.topic(t).is_none() {
            return Err(CoreError::NoSuchTopic(t.clone()).into());
        }
    }
    let analyzed = AnalyzedPool::new(&pool, Analyzer::new(stoplist(&args.analysis.stoplist)?, args.analysis.skip));
    let folds = match args.mode {
        Mode::Informativeness => None,
        Mode::Interestingness => Some(assign_folds(&pool, args.folds, args.seed)?),
    };
    let build = |topic: &str, kind: UnitKind| -> Result<Option<Reference>> {
        let r = match &folds {
            None => build_topic_reference(&analyzed, topic, kind),
            Some(f) => build_interestingness_reference(&analyzed, topic, f, kind),
        };
        match r {
            Ok(r) => Ok(Some(r)),
            Err(CoreError::EmptyReference(t)) => {
                warn!("empty {kind} reference for topic {t}");
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    };

    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    };
    let topics: Vec<&str> = match &only {
        Some(t) => vec![t.as_str()],
        None => pool.topics().iter().map(|t| t.topic_id.as_str()).collect(),
    };
    for topic in topics {
        for &g in &args.units {
            let kind = UnitKind::new(g, args.entity_restricted);
            let Some(r) = build(topic, kind)? else { continue };
            if only.is_some() {
                writeln!(out, "# topic={topic} mode={} units={kind} sources={}", args.mode, r.source_passage_ids.len())?;
                let mut units: Vec<(&str, u64)> = r.bag.iter().collect();
                units.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                for (u, c) in units {
                    writeln!(out, "{u}\t{c}")?;
                }
            } else {
                let record = ReferenceRecord {
                    topic_id: topic,
                    mode: args.mode,
                    unit_kind: g.name(),
                    entity_restricted: args.entity_restricted,
                    excluded_fold: folds.as_ref().and_then(|f| f.fold_of(topic)),
                    total_len: r.total_len,
                    sources: &r.source_passage_ids,
                    units: r.bag.iter().collect(),
                };
                serde_json::to_writer(&mut out, &record)?;
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct VectorReport<'a> {
    path: &'a Path,
    sha256: String,
    vocabulary: usize,
    dim: usize,
    zero_vectors: usize,
    sample: Vec<&'a str>,
}

fn inspect_vectors(path: &Path, format: VectorFormat, units: Granularity, underscore: bool) -> Result<()> {
    let options = StoreOptions {
        format,
        granularity: units,
        form: UnitForm::Stemmed,
        underscore_pairs: underscore,
    };
    let store = load_store(path, &options)?;
    print_json(&VectorReport {
        path,
        sha256: digest_file(path)?.sha256,
        vocabulary: store.len(),
        dim: store.dim(),
        zero_vectors: store.iter().filter(|(_, v)| v.iter().all(|&x| x == 0.0)).count(),
        sample: store.words().iter().take(10).map(String::as_str).collect(),
    })
}

fn eval(args: EvalArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let overrides = EvalOverrides {
        passages: args.passages,
        topics: args.topics,
        mode: args.mode,
        measures: args.measures,
        units: args.units,
        cutoffs: args.cutoffs,
        folds: args.folds,
        seed: args.seed,
        entity_restricted: args.entity_restricted,
        tie: args.tie,
        min_len: args.min_len,
        stoplist: args.stoplist,
        dedup: args.dedup,
        skip: args.skip,
        vectors: args.vectors,
        out: args.out,
    };
    let s = EvalSettings::resolve(overrides, &file)?;
    let config = EvalConfig {
        measures: s.measures()?,
        cutoffs: s.cutoffs.clone(),
        fold_count: s.folds,
        seed: s.seed,
        tie_break: s.tie_break(),
        scoring: ScoringOptions { kl_min_len: s.min_len },
    };
    config.validate().map_err(|e| usage(e.to_string()))?;

    let mut inputs = BTreeMap::new();
    inputs.insert("passages".to_string(), digest_file(&s.passages)?);
    inputs.insert("topics".to_string(), digest_file(&s.topics)?);
    if !matches!(s.stoplist.as_str(), "smart" | "none") {
        inputs.insert("stoplist".to_string(), digest_file(Path::new(&s.stoplist))?);
    }
    for v in &s.vectors {
        inputs.insert(format!("vectors:{}", v.measure), digest_file(&v.path)?);
    }

    std::fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    let outputs: BTreeMap<&'static str, PathBuf> = [
        ("manifest", "manifest.json"),
        ("config", "run.conf"),
        ("curves", "curves.csv"),
        ("scores", "scores.csv"),
    ]
    .into_iter()
    .map(|(k, f)| (k, s.out.join(f)))
    .collect();
    RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        command: "eval",
        seed: s.seed,
        config: s.snapshot(),
        inputs,
        outputs: outputs.clone(),
    }
    .write(&outputs["manifest"])?;
    std::fs::write(&outputs["config"], s.to_conf()).context("writing run.conf")?;

    let started = Instant::now();
    let pool = load(&s.passages, &s.topics, s.dedup)?;
    let analyzed = AnalyzedPool::new(&pool, Analyzer::new(stoplist(&s.stoplist)?, s.skip));
    let mut stores = StoreRegistry::new();
    for v in &s.vectors {
        let store = load_store(&v.path, &v.options())?;
        info!("{}: {} vectors of dim {}", v.measure, store.len(), store.dim());
        stores.insert(v.measure, store).map_err(|e| usage(e.to_string()))?;
    }
    let experiment = run_experiment(&analyzed, &config, s.mode, &stores)?;

    let create = |p: &Path| -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
    };
    write_curves_csv(experiment.curves(), create(&outputs["curves"])?)?;
    write_scores_csv(&experiment.runs, create(&outputs["scores"])?)?;
    info!(
        "{} measures over {} passages in {:.1?}",
        experiment.runs.len(),
        pool.passages().len(),
        started.elapsed()
    );
    println!("{}", outputs["curves"].display());
    Ok(())
}

fn selftest(args: SelftestArgs) -> Result<()> {
    let mut failed = 0;
    for check in oracle::run_suite(args.seed, args.cases) {
        let status = if check.passed() { "PASS" } else { "FAIL" };
        failed += usize::from(!check.passed());
        println!(
            "{status} {:<8} {} cases, max |error| {:.3e} (tolerance {:.0e})",
            check.name, check.cases, check.max_error, check.tolerance
        );
    }
    let mut refs_ok = true;
    for seed in 0..20u64 {
        let pool = synth::generate(&synth::SynthSpec {
            topics: 3 + (seed as usize % 10),
            passages: 40,
            vocab: 30,
            words_per_passage: (1, 6),
            seed: args.seed.wrapping_add(seed),
        })?;
        refs_ok &= oracle::reference_sources_match(&pool, 2 + seed as usize % 2, [seed]);
    }
    failed += usize::from(!refs_ok);
    println!("{} references 20 pools, source sets vs set comprehension", if refs_ok { "PASS" } else { "FAIL" });
    if failed > 0 {
        anyhow::bail!("{failed} self-test check(s) failed");
    }
    Ok(())
}

fn synthesize(args: SynthArgs) -> Result<()> {
    let pool = synth::generate(&synth::SynthSpec {
        topics: args.topics,
        passages: args.passages,
        vocab: args.vocab,
        seed: args.seed,
        ..Default::default()
    })?;
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    corpus::save_pool(&pool, &args.out_dir.join("passages.jsonl"), &args.out_dir.join("topics.tsv"))?;
    print_json(&corpus::pool_stats(&pool))
}
