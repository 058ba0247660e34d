//! `zsmine`: zero-shot suggestion mining from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 data or format, 4 backend, 5 cache miss.

mod commands;
mod config;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zsmine_core::classify::ClassifyError;
use zsmine_core::corpus::CorpusError;
use zsmine_core::freq::FreqError;
use zsmine_core::labels::LabelError;
use zsmine_core::scoring::{CacheError, ScoreError};
use zsmine_core::subsets::SearchError;
use zsmine_core::wordnet::WordNetError;
use zsmine_core::{Split, Subtask};

/// Bad flags, config or arguments detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "zsmine", version, about = "Zero-shot suggestion mining with NLI entailment")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Inference service base URL
    #[arg(long, global = true, env = "ZS_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Score cache (JSONL)
    #[arg(long, global = true, env = "ZS_CACHE", value_name = "PATH")]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, global = true)]
    pub model_id: Option<String>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Retries per batch after the first attempt
    #[arg(long, global = true)]
    pub retries: Option<usize>,
    /// Per-request timeout in seconds
    #[arg(long, global = true)]
    pub timeout: Option<f64>,
    /// Worker cap for scoring requests, subset search and baseline trials
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory with WordNet 3.0 `index.noun` and `data.noun`
    #[arg(long, global = true, value_name = "DIR")]
    pub wordnet_dir: Option<PathBuf>,
    /// Lexicon snapshot (JSON); defaults to the bundled fixture
    #[arg(long, global = true, value_name = "PATH")]
    pub snapshot: Option<PathBuf>,
    /// More logging (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Remote,
    CacheOnly,
    RemoteWithCache,
}

#[derive(Subcommand)]
pub enum Command {
    /// Inspect WordNet or write a lexicon snapshot
    #[command(subcommand)]
    Wordnet(WordnetCommand),
    /// Build or export label spaces
    #[command(subcommand)]
    Labels(LabelsCommand),
    /// Populate the score cache for a split and label space
    Score(ScoreArgs),
    /// Run an approach on a split: predictions CSV plus evaluation
    Classify(ClassifyArgs),
    /// Score a predictions CSV against gold labels
    Eval(EvalArgs),
    /// Exhaustive search over suggestion label subsets
    Search(SearchArgs),
    /// Random-labeling baseline
    Baseline(BaselineArgs),
    /// Relative word frequencies of two domains
    Freq(FreqArgs),
}

#[derive(Subcommand)]
pub enum WordnetCommand {
    /// Print a synset and its direct hyponyms
    Inspect {
        #[arg(default_value = "message.n.02")]
        sense: String,
    },
    /// List the noun senses of a lemma in index order
    Senses { lemma: String },
    /// Write the loaded lexicon as a JSON snapshot
    Snapshot {
        /// Keep only message.n.02, its direct hyponyms and the senses of "suggestion"
        #[arg(long)]
        fixture: bool,
        /// Snapshot file name inside the output directory
        #[arg(long, default_value = "wordnet-snapshot.json")]
        name: String,
    },
}

#[derive(Subcommand)]
pub enum LabelsCommand {
    /// Print the label space as a table
    Build(LabelArgs),
    /// Write the label space as `labels.json`
    Export(LabelArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ApproachArg {
    /// "This text is a suggestion." vs its negation
    A1,
    /// "This text is suggesting." vs its negation
    A1Suggesting,
    /// WordNet definitions of "suggestion" vs the negation
    A2,
    /// Message types (hyponyms of message.n.02)
    A3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    /// The eight suggestion candidates
    Candidates,
    /// The 32 published message types
    Table,
    /// Every direct hyponym in the loaded lexicon
    AllDirect,
}

#[derive(Args, Clone, Debug)]
pub struct MessageTypeArgs {
    /// Which hyponyms of message.n.02 become labels
    #[arg(long, value_enum, default_value = "table")]
    pub scope: ScopeArg,
    /// Join all lemmas with " or " instead of the first lemma
    #[arg(long)]
    pub extended: bool,
    /// Use "an" before vowel-initial phrases
    #[arg(long)]
    pub smart_article: bool,
    /// Render `_` in lemmas as spaces
    #[arg(long)]
    pub space_underscores: bool,
    /// Custom label space (JSON); replaces the built-in one
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
pub struct LabelArgs {
    #[arg(long, value_enum, default_value = "a1")]
    pub approach: ApproachArg,
    /// Add the negative hypothesis to message-type spaces
    #[arg(long)]
    pub negative: bool,
    #[command(flatten)]
    pub message: MessageTypeArgs,
}

#[derive(Args, Clone, Debug)]
pub struct DataArgs {
    #[arg(long, value_parser = parse_subtask)]
    pub subtask: Subtask,
    #[arg(long, value_parser = parse_split, default_value = "dev")]
    pub split: Split,
    /// CSV of `id,sentence,label`; overrides the configured path
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbArg {
    /// softmax over (entailment, contradiction)
    DropNeutral,
    /// softmax over all three logits
    ThreeWay,
}

#[derive(Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub labels: LabelArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Positive vs negative hypothesis
    Binary,
    /// Best definition vs negative
    DefsMax,
    /// Mean of definitions vs negative
    DefsMean,
    /// Argmax over all message types; suggestion iff the winner is in the subset
    Mapping,
    /// Argmax over the subset plus the negative hypothesis
    Competition,
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub labels: LabelArgs,
    /// Decision rule; defaults by approach (a1: binary, a2: defs-max, a3: mapping)
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Labels mapped to "suggestion" (a3); defaults to the eight candidates
    #[arg(long, value_delimiter = ',')]
    pub subset: Vec<String>,
    #[arg(long, value_enum, default_value = "drop-neutral")]
    pub prob: ProbArg,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Predictions CSV written by `classify`
    #[arg(long, value_name = "PATH")]
    pub predictions: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SearchModeArg {
    Mapping,
    Competition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub message: MessageTypeArgs,
    /// Candidate label ids; defaults to the eight suggestion candidates
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<String>,
    #[arg(long, default_value_t = 4)]
    pub k_min: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    #[arg(long, value_enum, default_value = "mapping")]
    pub mode: SearchModeArg,
    /// Results kept per subset size
    #[arg(long, default_value_t = 3)]
    pub top_n: usize,
    #[arg(long, value_enum, default_value = "table")]
    pub format: FormatArg,
    #[arg(long, value_enum, default_value = "drop-neutral")]
    pub prob: ProbArg,
}

#[derive(Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassesArg {
    Suggestion,
    NonSuggestion,
    All,
}

#[derive(Args)]
pub struct FreqArgs {
    /// Domain in the first column; the other subtask is the comparison
    #[arg(long, value_parser = parse_subtask, default_value = "A")]
    pub subtask: Subtask,
    #[arg(long, value_enum, default_value = "suggestion")]
    pub classes: ClassesArg,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Newline-separated words to drop
    #[arg(long, value_name = "PATH")]
    pub stopwords: Option<PathBuf>,
    /// Subtask A corpora; defaults to the configured A train, dev and test files
    #[arg(long = "a", value_name = "PATH")]
    pub a_files: Vec<PathBuf>,
    /// Subtask B corpora; defaults to the configured B dev and test files
    #[arg(long = "b", value_name = "PATH")]
    pub b_files: Vec<PathBuf>,
}

fn parse_subtask(s: &str) -> Result<Subtask, String> {
    s.parse()
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse()
}

/// Maps the first recognized cause to the documented exit code.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<ScoreError>() {
            return match e {
                ScoreError::CacheMiss { .. } => 5,
                ScoreError::Backend(_) => 4,
                ScoreError::Config(_) => 2,
                ScoreError::Cache(_) => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<ClassifyError>() {
            match e {
                ClassifyError::Scoring { .. } => continue,
                ClassifyError::Contract(_) => return 2,
                _ => return 3,
            }
        }
        if let Some(e) = cause.downcast_ref::<SearchError>() {
            match e {
                SearchError::Classify(_) => continue,
                SearchError::Spec(_) => return 2,
                _ => return 3,
            }
        }
        if cause.is::<CorpusError>()
            || cause.is::<WordNetError>()
            || cause.is::<LabelError>()
            || cause.is::<FreqError>()
            || cause.is::<CacheError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
        {
            return 3;
        }
    }
    1
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let argv: Vec<String> = std::env::args().skip(1).collect();
    match commands::dispatch(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
