//! `edflow`: synthetic worlds, ingestion, feature building, training,
//! evaluation and point forecasts from the command line.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edflow::featurebuild::{variant, Task};
use edflow::forecast::ModelKind;
use edflow::Timestamp;

#[derive(Debug, Parser)]
#[command(
    name = "edflow",
    version,
    about = "Emergency-department waiting-count forecasting pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic world in the ingestion schemas.
    Synth(SynthArgs),
    /// Parse and clean raw tables into integrated.csv.
    Ingest(IngestArgs),
    /// Build one dataset variant's feature table.
    Featurize(FeaturizeArgs),
    /// Grid-search a model family and write the selected model.
    Train(TrainArgs),
    /// Score models on the test split and write reports.
    Evaluate(EvaluateArgs),
    /// Predict the waiting count h steps after a timestamp.
    Forecast(ForecastArgs),
    /// Re-run a manifest and check that every output digest matches.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub days: Option<u32>,
    /// First day of the span (YYYY-MM-DD).
    #[arg(long, value_parser = parse_day)]
    pub start: Option<Timestamp>,
    /// JSON generator configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Waiting stays longer than this many minutes are dropped.
    #[arg(long, default_value_t = edflow::ingestion::DEFAULT_MAX_WAIT_MINUTES)]
    pub max_wait: i64,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: String,
    #[arg(long, value_enum, default_value_t = TaskArg::Hourly)]
    pub task: TaskArg,
    /// Steps ahead: hours for the hourly task (default 6), days for daily (default 1).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: Option<u32>,
    /// Hour at which daily windows end.
    #[arg(long, default_value_t = 17, value_parser = clap::value_parser!(u32).range(0..24))]
    pub anchor: u32,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub dataset: DatasetArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Model family; with --grid, keeps only that family's candidates.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// JSON grid of candidate configurations.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Model file written by `train`; repeat to rank several models.
    #[arg(long = "model-file", required = true)]
    pub model_files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Fixed stratum mean; defaults to the training targets' mean.
    #[arg(long, requires = "strata_sd")]
    pub strata_mean: Option<f64>,
    #[arg(long, requires = "strata_mean")]
    pub strata_sd: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "model-file")]
    pub model_file: PathBuf,
    /// Anchor time (YYYY-MM-DDTHH:MM).
    #[arg(long)]
    pub at: Timestamp,
    /// Must match the model's task when given.
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Also write forecast.json and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Hourly,
    Daily,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Hourly => Task::Hourly,
            TaskArg::Daily => Task::Daily,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Naive,
    Seasonal,
    Ridge,
    Forest,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Naive => ModelKind::Naive,
            ModelArg::Seasonal => ModelKind::SeasonalNaive,
            ModelArg::Ridge => ModelKind::Ridge,
            ModelArg::Forest => ModelKind::Forest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

fn parse_variant(s: &str) -> Result<String, String> {
    variant(s).map(|v| v.id).map_err(|e| e.to_string())
}

fn parse_day(s: &str) -> Result<Timestamp, String> {
    let date = edflow::time::parse_date(s).map_err(|e| e.to_string())?;
    Timestamp::from_date(date).map_err(|e| e.to_string())
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self::Data(e.into())
    }
}

pub fn run_args(args: Vec<OsString>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(Failure::Usage(e.render().to_string())),
    };
    let raw: Vec<String> = args.iter().skip(2).map(|a| a.to_string_lossy().into_owned()).collect();
    commands::dispatch(cli.command, raw)
}

fn main() -> ExitCode {
    match run_args(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprint!("{msg}");
            if !msg.ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
