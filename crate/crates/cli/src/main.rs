//! `evcoref` command-line tool.
//!
//! Exit codes: 0 on success, 1 on runtime errors (I/O, scoring failures),
//! 2 on invalid input (bad flags, malformed corpus, scorer/matrix mismatch).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evcoref_core::metrics::{export_curves, CurveFormat};
use evcoref_core::scorers::{Scorer, ScorerSpec, DEFAULT_LAMBDA};
use evcoref_core::simulator::{
    k_grid, linear_grid, run_seeded, run_seeds, sweep_k, tune_lambda, SimError, SimOptions,
    DEFAULT_REPLICATES,
};
use evcoref_core::{
    corpus_stats, parse_mentions_report, partition_by_topic, Mention, ScorerKind, TopicLevel, WorkflowError,
};
use evcoref_server::session::sha256_hex;
use evcoref_server::{AppState, ServiceConfig, SessionDefaults};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "evcoref", version, about = "Model-in-the-loop event coreference annotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus and report problems; exits 2 on the first invalid line.
    Validate {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = Level::Topic)]
        topic_level: Level,
    },
    /// Print topic, document, mention, cluster and singleton counts.
    Stats {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = Level::Topic)]
        topic_level: Level,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run one gold-oracle simulation and print the result as JSON.
    Simulate(SimulateArgs),
    /// Average recall and comparisons over a grid of k values.
    Sweep(SweepArgs),
    /// Pick the trigger/sentence weight with the best recall-effort curve.
    TuneLambda(TuneArgs),
    /// Serve annotation sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Topic,
    Subtopic,
}

impl From<Level> for TopicLevel {
    fn from(l: Level) -> Self {
        match l {
            Level::Topic => TopicLevel::Topic,
            Level::Subtopic => TopicLevel::Subtopic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lemma,
    Matrix,
    Combined,
    Random,
}

impl From<Kind> for ScorerKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Lemma => ScorerKind::Lemma,
            Kind::Matrix => ScorerKind::Matrix,
            Kind::Combined => ScorerKind::Combined,
            Kind::Random => ScorerKind::Random,
        }
    }
}

#[derive(Args, Clone)]
struct ScorerArgs {
    #[arg(long, value_enum, default_value_t = Kind::Lemma)]
    scorer: Kind,
    /// Pair score file (CSV `a,b,score` or JSONL); the trigger-level matrix
    /// for `combined`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Context-level pair score file for `combined`.
    #[arg(long)]
    context_matrix: Option<PathBuf>,
    /// Score for pairs missing from a matrix (missing pairs are errors
    /// otherwise).
    #[arg(long)]
    default_score: Option<f64>,
    /// Trigger weight for `lemma` and `combined`.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
}

impl ScorerArgs {
    fn spec(&self) -> Result<ScorerSpec, CliError> {
        let spec = ScorerSpec {
            kind: self.scorer.into(),
            lambda: self.lambda,
            matrix: self.matrix.clone(),
            context_matrix: self.context_matrix.clone(),
            default_score: self.default_score,
        };
        spec.check().map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Level::Topic)]
    topic_level: Level,
    /// After a miss, place the target in its gold cluster instead of
    /// starting a new one.
    #[arg(long)]
    oracle_repair: bool,
    /// Write a JSON manifest of every setting and seed to this file.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Candidates shown per target; the fractional part is the chance of one
    /// more. `inf` disables pruning.
    #[arg(long)]
    k: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leave the per-target trace out of the output.
    #[arg(long)]
    no_records: bool,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 2.0)]
    k_min: f64,
    #[arg(long, default_value_t = 20.0)]
    k_max: f64,
    #[arg(long, default_value_t = 0.5)]
    k_step: f64,
    /// Runs per k, with seeds seed, seed+1, ...
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// `start:end:step` or a comma-separated list.
    #[arg(long, default_value = "0:1:0.1")]
    lambda_grid: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Default corpus for sessions that do not name one.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long, default_value_t = 5.0)]
    k: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Level::Topic)]
    topic_level: Level,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Directory holding session manifests and decision logs.
    #[arg(long, default_value = "evcoref-state")]
    state: PathBuf,
    /// Browser origin allowed by CORS; any origin when omitted.
    #[arg(long)]
    cors_origin: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Workflow(WorkflowError::InvalidK(_)) => CliError::Invalid(e.to_string()),
            SimError::Workflow(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn runtime(context: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", context.display()))
}

struct Corpus {
    mentions: Vec<Mention>,
    sha256: String,
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    let bytes = std::fs::read(path).map_err(|e| runtime(path, e))?;
    let report = parse_mentions_report(bytes.as_slice())
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    for w in &report.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(Corpus {
        mentions: report.mentions,
        sha256: sha256_hex(&bytes),
    })
}

/// Stdout or a file, buffered.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| runtime(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut out = output(path)?;
    let target = path.unwrap_or(Path::new("<stdout>"));
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| runtime(target, e))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| runtime(target, e))
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'static str,
    command: &'static str,
    corpus_path: &'a Path,
    corpus_sha256: &'a str,
    mentions: usize,
    topic_level: TopicLevel,
    oracle_repair: bool,
    scorer: &'a ScorerSpec,
    seed: u64,
    /// Sub-seeds of the first run; replicate r uses seed + r.
    scorer_seed: u64,
    prune_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_grid: Option<Vec<f64>>,
}

impl<'a> RunManifest<'a> {
    fn new(command: &'static str, args: &'a CorpusArgs, corpus: &'a Corpus, scorer: &'a ScorerSpec, seed: u64) -> Self {
        let (scorer_seed, prune_seed) = run_seeds(seed);
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            corpus_path: &args.corpus,
            corpus_sha256: &corpus.sha256,
            mentions: corpus.mentions.len(),
            topic_level: args.topic_level.into(),
            oracle_repair: args.oracle_repair,
            scorer,
            seed,
            scorer_seed,
            prune_seed,
            k: None,
            k_grid: None,
            replicates: None,
            lambda_grid: None,
        }
    }

    fn write(&self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => write_json(Some(p), self),
            None => Ok(()),
        }
    }
}

fn sim_options(args: &CorpusArgs) -> SimOptions {
    SimOptions {
        oracle_repair: args.oracle_repair,
        topic_level: args.topic_level.into(),
    }
}

fn build_scorer(spec: &ScorerSpec, mentions: &[Mention]) -> Result<Scorer<f64>, CliError> {
    spec.build(mentions).map_err(|e| CliError::Invalid(e.to_string()))
}

fn parse_lambda_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: String| CliError::Invalid(format!("--lambda-grid `{text}`: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:end:step".into()));
        }
        linear_grid(num(parts[0])?, num(parts[1])?, num(parts[2])?).map_err(|e| bad(e.to_string()))?
    } else {
        text.split(',').map(num).collect::<Result<Vec<f64>, _>>()?
    };
    if let Some(l) = grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(bad(format!("{l} is outside [0, 1]")));
    }
    Ok(grid)
}

fn validate(corpus: &Path, level: TopicLevel) -> Result<(), CliError> {
    let corpus = load_corpus(corpus)?;
    let mentions = &corpus.mentions;
    let topics = partition_by_topic(mentions, level).len();
    let labeled = mentions.iter().filter(|m| m.gold().is_some()).count();
    if labeled == mentions.len() && !mentions.is_empty() {
        corpus_stats(mentions, level).map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    println!("ok: {} mentions in {topics} topics, {labeled} with gold labels", mentions.len());
    Ok(())
}

fn stats(corpus: &Path, level: TopicLevel, json: bool) -> Result<(), CliError> {
    let corpus = load_corpus(corpus)?;
    let s = corpus_stats(&corpus.mentions, level).map_err(|e| CliError::Invalid(e.to_string()))?;
    if json {
        return write_json(None, &s);
    }
    let rows: [(&str, u64); 7] = [
        ("Topics", s.topics as u64),
        ("Documents", s.documents as u64),
        ("Mentions", s.mentions as u64),
        ("Clusters", s.clusters as u64),
        ("Singletons", s.singletons as u64),
        ("Within-topic pairs", s.pairs_within_topic),
        ("Coreferent pairs", s.positive_pairs),
    ];
    for (name, value) in rows {
        println!("{name:<20}{value:>10}");
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = args.scorer.spec()?;
    let corpus = load_corpus(&args.corpus.corpus)?;
    let scorer = build_scorer(&spec, &corpus.mentions)?;
    let part = partition_by_topic(&corpus.mentions, args.corpus.topic_level.into());
    let mut result = run_seeded(&part, &scorer, args.k, args.seed, &sim_options(&args.corpus))?;
    if args.no_records {
        result.records.clear();
    }
    let mut manifest = RunManifest::new("simulate", &args.corpus, &corpus, &spec, args.seed);
    manifest.k = Some(args.k);
    manifest.write(args.corpus.manifest.as_deref())?;
    write_json(None, &result)
}

fn grid(args: &GridArgs) -> Result<Vec<f64>, CliError> {
    if args.replicates == 0 {
        return Err(CliError::Invalid("--replicates must be at least 1".into()));
    }
    Ok(k_grid(args.k_min, args.k_max, args.k_step)?)
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let spec = args.scorer.spec()?;
    let ks = grid(&args.grid)?;
    let corpus = load_corpus(&args.corpus.corpus)?;
    let scorer = build_scorer(&spec, &corpus.mentions)?;
    let part = partition_by_topic(&corpus.mentions, args.corpus.topic_level.into());
    let points = sweep_k(&part, &scorer, &ks, args.grid.replicates, args.grid.seed, &sim_options(&args.corpus))?;
    let mut manifest = RunManifest::new("sweep", &args.corpus, &corpus, &spec, args.grid.seed);
    manifest.k_grid = Some(ks);
    manifest.replicates = Some(args.grid.replicates);
    manifest.write(args.corpus.manifest.as_deref())?;

    let format = match args.format {
        Format::Csv => CurveFormat::Csv,
        Format::Json => CurveFormat::Json,
    };
    let target = args.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut out = output(args.out.as_deref())?;
    export_curves(&points, format, &mut out).map_err(|e| runtime(&target, e))?;
    out.flush().map_err(|e| runtime(&target, e))
}

fn tune(args: TuneArgs) -> Result<(), CliError> {
    let spec = args.scorer.spec()?;
    if !spec.kind.uses_lambda() {
        return Err(CliError::Invalid(format!(
            "scorer `{}` has no λ to tune (use lemma or combined)",
            spec.kind
        )));
    }
    let lambdas = parse_lambda_grid(&args.lambda_grid)?;
    let ks = grid(&args.grid)?;
    let corpus = load_corpus(&args.corpus.corpus)?;
    let scorer = build_scorer(&spec, &corpus.mentions)?;
    let part = partition_by_topic(&corpus.mentions, args.corpus.topic_level.into());
    let report = tune_lambda(
        &part,
        &scorer,
        &lambdas,
        &ks,
        args.grid.replicates,
        args.grid.seed,
        &sim_options(&args.corpus),
    )?;
    let mut manifest = RunManifest::new("tune-lambda", &args.corpus, &corpus, &spec, args.grid.seed);
    manifest.k_grid = Some(ks);
    manifest.replicates = Some(args.grid.replicates);
    manifest.lambda_grid = Some(lambdas);
    manifest.write(args.corpus.manifest.as_deref())?;
    eprintln!("lambda* = {}", report.lambda_star);
    write_json(args.out.as_deref(), &report)
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let spec = args.scorer.spec()?;
    if !(args.k >= 1.0) {
        return Err(CliError::Invalid(format!("--k must be at least 1, got {}", args.k)));
    }
    if let Some(path) = &args.corpus {
        // Fail before binding rather than on the first session.
        let corpus = load_corpus(path)?;
        build_scorer(&spec, &corpus.mentions)?;
    }
    let config = ServiceConfig {
        state_dir: args.state.clone(),
        defaults: SessionDefaults {
            corpus_path: args.corpus.clone(),
            scorer: spec,
            k: args.k,
            seed: args.seed,
            topic_level: args.topic_level.into(),
        },
        cors_origin: args.cors_origin.clone(),
    };
    let state = AppState::open(config).map_err(|e| runtime(&args.state, e))?;
    let addr = SocketAddr::new(args.host, args.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(evcoref_server::serve(addr, state))
        .map_err(|e| CliError::Runtime(format!("{addr}: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { corpus, topic_level } => validate(&corpus, topic_level.into()),
        Command::Stats {
            corpus,
            topic_level,
            json,
        } => stats(&corpus, topic_level.into(), json),
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::TuneLambda(args) => tune(args),
        Command::Serve(args) => serve(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
