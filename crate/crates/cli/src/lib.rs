//! `hatelab` subcommands. Each stage reads and writes plain files so any
//! stage can be rerun on its own.

mod annotate;
pub mod config;
mod data;
mod learn;

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hatelab_core::models::ModelType;
use serde::Serialize;

pub use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing flags; exit 1.
    Usage(String),
    /// Unreadable or invalid input; exit 2.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

pub(crate) fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

pub(crate) fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

#[derive(Debug, Parser)]
#[command(name = "hatelab", version, about = "Burmese hate-speech corpus, annotation and classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a raw posts CSV and report skipped rows.
    Ingest(IngestArgs),
    /// Run the cleaning pipeline into a JSONL corpus.
    Clean(CleanArgs),
    /// Lexicon utilities.
    #[command(subcommand)]
    Lexicon(LexiconCommand),
    /// Pair annotators and deal batches.
    Assign(AssignArgs),
    /// Per-pair agreement from a labels file.
    Agreement(AgreementArgs),
    /// Record facilitator decisions and write final labels.
    Adjudicate(AdjudicateArgs),
    /// Cross-validate and train a classifier.
    Train(TrainArgs),
    /// Score a saved model against gold labels.
    Evaluate(EvaluateArgs),
    /// Run a saved model over a corpus.
    Predict(PredictArgs),
    /// Expert review of model output.
    #[command(subcommand)]
    Review(ReviewCommand),
    /// Serve the annotation API.
    Serve(ServeArgs),
    /// Write a synthetic corpus, lexicon and gold labels for trials.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in", value_name = "CSV")]
    pub input: Option<PathBuf>,
    /// Re-written, validated posts CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Inputs for the cleaning pipeline, shared with `train --in`.
#[derive(Debug, Args, Clone, Default)]
pub struct CleanInputs {
    /// Hate-term lexicon TSV; repeat to merge several.
    #[arg(long = "lexicon", value_name = "TSV")]
    pub lexicons: Vec<PathBuf>,
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Zawgyi-to-Unicode rewrite rules TSV.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Encoding detector marker TSV.
    #[arg(long)]
    pub markers: Option<PathBuf>,
    #[arg(long)]
    pub min_syllables: Option<usize>,
    #[arg(long)]
    pub ratio_threshold: Option<f64>,
    #[arg(long)]
    pub encoding_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[arg(long = "in", value_name = "CSV")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: CleanInputs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corpus JSONL.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LexiconCommand {
    /// Merge two lexicons, reporting duplicates and containments.
    Merge(MergeArgs),
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(value_name = "TSV", num_args = 2.., required = true)]
    pub lexicons: Vec<PathBuf>,
    /// Terms to drop, one per line.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    /// Corpus JSONL whose post ids are dealt, in file order.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated annotator ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub annotators: Vec<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Plan JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Restrict pairs and batches to the plan; unfinished rounds show null.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub round: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdjudicateArgs {
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// `POST_ID=Yes|No`; repeatable.
    #[arg(long = "decide", value_name = "POST=DECISION")]
    pub decisions: Vec<String>,
    #[arg(long)]
    pub facilitator: Option<String>,
    /// Final labels CSV (resolved posts only).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Where labelled posts come from: a cleaned corpus, or raw posts cleaned on the fly.
#[derive(Debug, Args, Clone, Default)]
pub struct CorpusSource {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Raw posts CSV; cleaned in memory with the clean flags.
    #[arg(long = "in", value_name = "CSV", conflicts_with = "corpus")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub clean: CleanInputs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: Option<ModelType>,
    /// ModelSpec JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// JSON array of ModelSpecs to search with cross-validation.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Search the built-in feature grid with the model's default hyperparameters.
    #[arg(long, conflicts_with = "grid")]
    pub default_grid: bool,
    #[arg(long)]
    pub oversample: bool,
    #[command(flatten)]
    pub source: CorpusSource,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Folds; 0 skips cross-validation.
    #[arg(long)]
    pub cv: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "model", value_name = "MODEL_JSON")]
    pub model: PathBuf,
    #[command(flatten)]
    pub source: CorpusSource,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Seed for cleaning raw input (`--in`).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long = "model", value_name = "MODEL_JSON")]
    pub model: PathBuf,
    #[command(flatten)]
    pub source: CorpusSource,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Review items JSONL.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    /// Pick items for expert review.
    Sample(SampleArgs),
    /// Categorize model errors against expert labels.
    Report(ReviewReportArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Review items JSONL from `predict`.
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long, default_value = "uncertainty")]
    pub strategy: hatelab_core::review::Strategy,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReviewReportArgs {
    #[arg(long)]
    pub items: PathBuf,
    /// Expert labels in the labels CSV format.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Accounts JSON with passcodes.
    #[arg(long)]
    pub accounts: Option<PathBuf>,
    /// Corpus JSONL for post text and links.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub posts: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Add rows the cleaning pipeline should drop or convert.
    #[arg(long)]
    pub noise: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// `{command, config, report}` as written by every report-producing stage.
#[derive(Serialize)]
pub(crate) struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub report: T,
}

/// Pretty JSON to `out`, or stdout.
pub(crate) fn emit(out: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(data)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| data(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(data),
    }
}

pub(crate) fn report<T: Serialize>(out: Option<&Path>, command: &str, config: &RunConfig, report: T) -> Result<(), CliError> {
    emit(out, &Envelope { command, config, report })
}

/// Flag first, then config.
pub(crate) fn pick<T: Clone>(flag: &Option<T>, config: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| config.clone())
}

pub(crate) fn need<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("{flag} is required")))
}

pub(crate) fn need_seed(flag: Option<u64>, config: &mut RunConfig, stage: &str) -> Result<u64, CliError> {
    let seed = flag.or(config.seed).ok_or_else(|| usage(format!("--seed is required for {stage}")))?;
    config.seed = Some(seed);
    Ok(seed)
}

pub fn execute(cli: Cli, config: RunConfig) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(a) => data::ingest(a, config),
        Command::Clean(a) => data::clean(a, config),
        Command::Lexicon(LexiconCommand::Merge(a)) => data::merge(a, config),
        Command::Synth(a) => data::synth(a),
        Command::Assign(a) => annotate::assign(a, config),
        Command::Agreement(a) => annotate::agreement(a, config),
        Command::Adjudicate(a) => annotate::adjudicate(a, config),
        Command::Serve(a) => annotate::serve(a, config),
        Command::Train(a) => learn::train(a, config),
        Command::Evaluate(a) => learn::evaluate(a, config),
        Command::Predict(a) => learn::predict(a, config),
        Command::Review(ReviewCommand::Sample(a)) => learn::sample(a, config),
        Command::Review(ReviewCommand::Report(a)) => learn::review_report(a, config),
    }
}

/// Parses `args`, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = RunConfig::from_env().and_then(|cfg| execute(cli, cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hatelab: {e}");
            e.exit_code()
        }
    }
}
