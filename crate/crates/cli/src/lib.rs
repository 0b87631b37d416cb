//! The `emoprofile` command line.
//!
//! Every subcommand writes machine-readable output to stdout and diagnostics
//! to stderr. Exit status is 0 on success, 1 for data and usage errors and 2
//! when the classifier backend failed.

mod repl;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emoprofile_core::eval::{evaluate_emotion_classification, evaluate_screening, read_dialogues, EvalOptions};
use emoprofile_core::metrics::{distance_table, render_csv, render_table, PairwiseMatrix};
use emoprofile_core::reference::{
    build_reference, post_embedding, read_corpus, Aggregation, BuildOptions, CorpusPost, LengthFilter,
};
use emoprofile_core::registry::PRIMARY_REFERENCE;
use emoprofile_core::{
    screen, BackendConfig, BackendKind, Classifier, KlDirection, Polarity, Registry, ScreeningOptions, DISCLAIMER,
};
use emoprofile_service::{ConfigError, ServeError, ServiceConfig};
use serde::Serialize;

pub use repl::{repl, ReplOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] emoprofile_core::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        let backend = match self {
            CliError::Core(e) | CliError::Serve(ServeError::Setup(e)) => e.is_backend(),
            _ => false,
        };
        if backend {
            2
        } else {
            1
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(
    name = "emoprofile",
    version,
    about = "Emotional profiling and divergence-based screening"
)]
pub struct Cli {
    /// Seed for the mock backend.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// More diagnostics on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a reference profile from a corpus and store it in a registry file.
    BuildRef(BuildRefArgs),
    /// Screen one text (argument, file or stdin) or every post of a corpus file.
    Screen(ScreenArgs),
    /// Evaluate screening or emotion classification on a labelled dataset.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Serve the HTTP session API.
    Serve(ServeArgs),
    /// Distances from an anchor reference to every reference in a registry.
    ExportDistances(ExportArgs),
    /// Chat on the terminal; each line runs the full turn pipeline.
    Repl(ReplArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// Classifier backend [default: mock]
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    /// Completion endpoint of the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Emotion samples drawn per prompt.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Concurrent request bound for the remote backend.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Per-request timeout for the remote backend.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
}

impl BackendArgs {
    fn apply(&self, mut config: BackendConfig, seed: u64) -> BackendConfig {
        config.seed = seed;
        if let Some(kind) = self.backend {
            config.kind = match kind {
                BackendChoice::Mock => BackendKind::Mock,
                BackendChoice::Remote => BackendKind::Remote,
            };
        }
        config = config.with_env_overrides();
        if let Some(endpoint) = &self.endpoint {
            config.endpoint = Some(endpoint.clone());
        }
        if let Some(n) = self.samples {
            config.samples_per_prompt = n;
        }
        if let Some(n) = self.max_in_flight {
            config.max_in_flight = n;
        }
        if let Some(ms) = self.timeout_ms {
            config.timeout_ms = ms;
        }
        config
    }

    fn connect(&self, seed: u64) -> Result<Classifier> {
        Ok(self.apply(BackendConfig::default(), seed).connect()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionChoice {
    /// KL(row ‖ anchor)
    RowToAnchor,
    /// KL(anchor ‖ row)
    AnchorToRow,
}

impl From<DirectionChoice> for KlDirection {
    fn from(d: DirectionChoice) -> Self {
        match d {
            DirectionChoice::RowToAnchor => KlDirection::RowToAnchor,
            DirectionChoice::AnchorToRow => KlDirection::AnchorToRow,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScreeningArgs {
    /// Argument order of KL; anchor-to-row measures KL(sample ‖ reference).
    #[arg(long, value_enum, default_value = "anchor-to-row")]
    pub kl_direction: DirectionChoice,
    /// Also match against references of unused polarity, as negatives.
    #[arg(long)]
    pub include_all_references: bool,
}

impl ScreeningArgs {
    fn options(&self) -> ScreeningOptions {
        ScreeningOptions {
            kl_direction: self.kl_direction.into(),
            include_all_references: self.include_all_references,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationChoice {
    RawCounts,
    PerSegment,
}

#[derive(Debug, Args)]
pub struct BuildRefArgs {
    #[arg(long)]
    pub name: String,
    /// pos, neg or unused; fixed for the well-known reference names.
    #[arg(long)]
    pub polarity: Polarity,
    /// JSONL or CSV corpus with a `text` field.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Registry file; created when missing, otherwise the reference is replaced or added.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "raw-counts")]
    pub aggregation: AggregationChoice,
    /// Skip posts shorter than --min-chars or longer than --max-chars.
    #[arg(long)]
    pub length_filter: bool,
    #[arg(long, default_value_t = LengthFilter::default().min_chars, requires = "length_filter")]
    pub min_chars: usize,
    #[arg(long, default_value_t = LengthFilter::default().max_chars, requires = "length_filter")]
    pub max_chars: usize,
    /// Worker threads for classification.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[arg(long)]
    pub registry: PathBuf,
    /// Text to screen.
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    /// Corpus file; every post is screened and reported on its own line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,
    #[command(flatten)]
    pub screening: ScreeningArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Binary screening metrics per method and for the combined rule.
    Screening(EvalScreeningArgs),
    /// Prompt- and conversation-level emotion classification reports.
    Emotions(EvalEmotionsArgs),
}

#[derive(Debug, Args)]
pub struct EvalScreeningArgs {
    /// CSV or JSONL with `text` and `label` fields.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub registry: PathBuf,
    /// Append finished items here and resume from it on the next run.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    #[command(flatten)]
    pub screening: ScreeningArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EvalEmotionsArgs {
    /// Dialogue dataset (CSV or JSONL).
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML service config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<std::net::SocketAddr>,
    /// Directory for per-session event logs.
    #[arg(long)]
    pub session_dir: Option<PathBuf>,
    #[command(flatten)]
    pub screening: ScreeningArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long, default_value = PRIMARY_REFERENCE)]
    pub anchor: String,
    /// Every reference against every reference instead of one anchor.
    #[arg(long)]
    pub matrix: bool,
    #[arg(long, value_enum, default_value = "table")]
    pub format: TableFormat,
    /// Argument order of KL; row-to-anchor measures KL(row ‖ anchor).
    #[arg(long, value_enum, default_value = "row-to-anchor")]
    pub kl_direction: DirectionChoice,
}

#[derive(Debug, Args)]
pub struct ReplArgs {
    /// Registry to screen the running profile against.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Where the session export goes at end of input.
    #[arg(long, default_value = "session.json")]
    pub export: PathBuf,
    #[command(flatten)]
    pub screening: ScreeningArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}

/// Parses arguments and runs, reporting errors on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let stdin = io::stdin();
    match run(cli, &mut stdin.lock(), &mut io::stdout().lock(), &mut io::stderr()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli, stdin: &mut dyn io::BufRead, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::BuildRef(args) => build_ref(args, seed, out, err),
        Command::Screen(args) => screen_cmd(args, seed, stdin, out),
        Command::Eval(EvalCommand::Screening(args)) => eval_screening(args, seed, out),
        Command::Eval(EvalCommand::Emotions(args)) => eval_emotions(args, seed, out),
        Command::Serve(args) => serve(args, seed),
        Command::ExportDistances(args) => export_distances(args, out),
        Command::Repl(args) => {
            let classifier = args.backend.connect(seed)?;
            let registry = match &args.registry {
                Some(path) => Registry::load(path)?,
                None => Registry::default(),
            };
            let outcome = repl(stdin, out, err, &classifier, &registry, &args.screening.options())?;
            write_atomically(&args.export, &serde_json::to_string_pretty(&outcome.export)?)?;
            writeln!(err, "session export written to {}", args.export.display())?;
            Ok(())
        }
    }
}

fn write_atomically(path: &Path, text: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, format!("{text}\n"))?;
    std::fs::rename(tmp, path)
}

#[derive(Serialize)]
struct BuildSummary<'a> {
    name: &'a str,
    polarity: Polarity,
    post_count: usize,
    segment_count: usize,
    skipped_posts: usize,
    valid_samples: u64,
    discarded_samples: u64,
    references: usize,
    warnings: Vec<String>,
}

fn build_ref(args: BuildRefArgs, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let classifier = args.backend.connect(seed)?;
    let corpus = read_corpus(&args.corpus)?;
    let options = BuildOptions {
        aggregation: match args.aggregation {
            AggregationChoice::RawCounts => Aggregation::RawCounts,
            AggregationChoice::PerSegment => Aggregation::PerSegment,
        },
        length_filter: args.length_filter.then_some(LengthFilter {
            min_chars: args.min_chars,
            max_chars: args.max_chars,
        }),
        source: args.corpus.display().to_string(),
        workers: args.workers,
    };
    let built = build_reference(&args.name, args.polarity, &corpus, &classifier, &options)?;
    let mut registry = Registry::load_or_default(&args.out)?;
    registry.upsert(built.reference.clone())?;
    registry.save(&args.out)?;
    let warnings = registry.warnings();
    for w in &warnings {
        writeln!(err, "warning: {w}")?;
    }
    let summary = BuildSummary {
        name: &built.reference.name,
        polarity: built.reference.polarity,
        post_count: built.reference.post_count,
        segment_count: built.reference.segment_count,
        skipped_posts: built.skipped_posts,
        valid_samples: built.valid_samples,
        discarded_samples: built.discarded_samples,
        references: registry.len(),
        warnings,
    };
    writeln!(out, "{}", serde_json::to_string(&summary)?)?;
    Ok(())
}

#[derive(Serialize)]
struct ScreenLine<'a> {
    id: &'a str,
    disclaimer: &'static str,
    profile: &'a emoprofile_core::EmotionalProfile,
    screening: &'a emoprofile_core::ScreeningResult,
}

fn screen_cmd(args: ScreenArgs, seed: u64, stdin: &mut dyn io::BufRead, out: &mut dyn Write) -> Result<()> {
    let registry = Registry::load(&args.registry)?;
    let classifier = args.backend.connect(seed)?;
    let options = args.screening.options();
    let posts = match (&args.text, &args.input) {
        (Some(text), _) => vec![CorpusPost::new("text", text.clone())],
        (None, Some(path)) => read_corpus(path)?,
        (None, None) => {
            let mut text = String::new();
            stdin.read_to_string(&mut text)?;
            vec![CorpusPost::new("stdin", text)]
        }
    };
    if args.format == ReportFormat::Table {
        writeln!(out, "{DISCLAIMER}")?;
    }
    for post in &posts {
        let profile = post_embedding(post, &classifier)?;
        let result = screen(&profile.distribution, &registry, &options)?;
        match args.format {
            ReportFormat::Json => {
                let line = ScreenLine {
                    id: &post.id,
                    disclaimer: DISCLAIMER,
                    profile: &profile,
                    screening: &result,
                };
                writeln!(out, "{}", serde_json::to_string(&line)?)?;
            }
            ReportFormat::Table => {
                write!(out, "{}\t{}", post.id, result.combined_label)?;
                for (metric, decision) in &result.per_metric {
                    let nearest = decision.nearest.as_deref().unwrap_or("-");
                    write!(out, "\t{}={}:{}", metric.name(), nearest, decision.label)?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

fn eval_screening(args: EvalScreeningArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let registry = Registry::load(&args.registry)?;
    let classifier = args.backend.connect(seed)?;
    let dataset = read_corpus(&args.dataset)?;
    let options = EvalOptions {
        screening: args.screening.options(),
        checkpoint: args.checkpoint,
    };
    let report = evaluate_screening(&dataset, &registry, &classifier, &options)?;
    match args.format {
        ReportFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
        ReportFormat::Table => write!(out, "{}", report.render())?,
    }
    Ok(())
}

fn eval_emotions(args: EvalEmotionsArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let classifier = args.backend.connect(seed)?;
    let dialogues = read_dialogues(&args.dataset)?;
    let report = evaluate_emotion_classification(&dialogues, &classifier)?;
    match args.format {
        ReportFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
        ReportFormat::Table => write!(out, "{}", report.render())?,
    }
    Ok(())
}

fn serve(args: ServeArgs, seed: u64) -> Result<()> {
    let config = match &args.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    let mut config = config.with_env_overrides()?;
    if let Some(path) = args.registry {
        config.registry = Some(path);
    }
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    if let Some(dir) = args.session_dir {
        config.session_dir = Some(dir);
    }
    config.backend = args.backend.apply(config.backend, seed);
    config.screening = args.screening.options();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(emoprofile_service::serve(config))?;
    Ok(())
}

fn export_distances(args: ExportArgs, out: &mut dyn Write) -> Result<()> {
    let registry = Registry::load(&args.registry)?;
    let direction = args.kl_direction.into();
    if args.matrix {
        let matrix = PairwiseMatrix::compute(registry.references(), direction)?;
        match args.format {
            TableFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&matrix)?)?,
            TableFormat::Csv | TableFormat::Table => write!(out, "{}", matrix.to_csv()?)?,
        }
        return Ok(());
    }
    let anchor = registry.require(&args.anchor)?;
    let rows = distance_table(&anchor.distribution, registry.references(), direction)?;
    match args.format {
        TableFormat::Table => write!(out, "{}", render_table(&rows))?,
        TableFormat::Csv => write!(out, "{}", render_csv(&rows)?)?,
        TableFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let backend = CliError::Core(emoprofile_core::Error::BackendUnavailable {
            attempts: 3,
            reason: "down".into(),
        });
        assert_eq!(backend.exit_code(), 2);
        assert_eq!(CliError::Core(emoprofile_core::Error::EmptyPrompt).exit_code(), 1);
    }

    #[test]
    fn backend_flags_override_defaults() {
        let args = BackendArgs {
            backend: Some(BackendChoice::Remote),
            endpoint: Some("http://127.0.0.1:1/v1/completions".into()),
            samples: Some(4),
            ..BackendArgs::default()
        };
        let config = args.apply(BackendConfig::default(), 5);
        assert_eq!(config.kind, BackendKind::Remote);
        assert_eq!(config.samples_per_prompt, 4);
        assert_eq!(config.seed, 5);
        assert_eq!(config.endpoint.as_deref(), Some("http://127.0.0.1:1/v1/completions"));
    }

    #[test]
    fn parses_every_subcommand() {
        for line in [
            "emoprofile build-ref --name suicide --polarity pos --corpus c.jsonl --out r.json",
            "emoprofile --seed 3 screen --registry r.json --text hi --kl-direction row-to-anchor",
            "emoprofile eval screening --dataset d.csv --registry r.json --format json",
            "emoprofile eval emotions --dataset ed.jsonl --backend mock",
            "emoprofile serve --registry r.json --bind 127.0.0.1:0",
            "emoprofile export-distances --registry r.json --matrix --format csv",
            "emoprofile repl --export out.json",
        ] {
            Cli::try_parse_from(line.split(' ')).unwrap_or_else(|e| panic!("{line}: {e}"));
        }
        assert!(Cli::try_parse_from(["emoprofile", "build-ref", "--name", "x"]).is_err());
        assert!(Cli::try_parse_from([
            "emoprofile",
            "build-ref",
            "--name",
            "x",
            "--polarity",
            "maybe",
            "--corpus",
            "c",
            "--out",
            "o"
        ])
        .is_err());
    }
}
