//! `facelayout`: batch pipeline over annotation, channel, model and report files.
//!
//! Failures print one JSON object on stderr and exit with a code per error class:
//! 2 usage, 3 I/O, 4 parse or format, 5 validation, 6 training or evaluation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use facelayout_core::data::{ANNOTATION_FORMAT, CHANNEL_FORMAT};
use facelayout_core::eval::REPORT_FORMAT;
use facelayout_core::learn::MODEL_FORMAT;
use facelayout_core::Error;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "facelayout", about = "Face-layout descriptors, SVM training and evaluation")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Merge oriented-detector and Viola-Jones detections into one annotation file.
    Merge(MergeArgs),
    /// Compute facial descriptors for every image.
    Extract(ExtractArgs),
    /// Generate a synthetic annotation file.
    Synth(SynthArgs),
    /// Train per-channel classifiers (and fusion) on all images.
    Train(TrainArgs),
    /// Score images with a trained model.
    Predict(PredictArgs),
    /// Cross-validate channels and their fusion.
    Eval(EvalArgs),
    /// Print the table of a saved evaluation report.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MergeArgs {
    /// Annotation file holding the oriented detector's faces.
    #[arg(long)]
    pub oriented: PathBuf,
    /// Annotation file holding Viola-Jones frontal and profile faces.
    #[arg(long)]
    pub vj: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// IoU at or above which two boxes cover the same face.
    #[arg(long, default_value_t = 0.3)]
    pub iou: f64,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct DescriptorArgs {
    /// Distance bins.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Pie sector angle in degrees.
    #[arg(long, default_value_t = 60)]
    pub alpha: u32,
    /// Grid as ROWSxCOLS.
    #[arg(long, default_value = "1x3")]
    pub grid: String,
    /// L1-normalize each histogram.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Combined descriptor channel file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    /// Also write one channel per histogram as `<dir of --out>/<part>.chan`.
    #[arg(long)]
    pub per_descriptor: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of position noise in pixels.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Probability of negating each orientation.
    #[arg(long, default_value_t = 0.0)]
    pub flip: f64,
    /// Probability of dropping each face.
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct ChannelArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Comma-separated channels, each `name` or `name=path`. Bare names resolve to
    /// `<channel-dir>/<name>.chan`.
    #[arg(long, value_delimiter = ',', default_value = "facedesc")]
    pub channels: Vec<String>,
    /// Defaults to the directory of the annotation file.
    #[arg(long)]
    pub channel_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct SvmArgs {
    /// Fixed cost; skips the grid search together with --gamma.
    #[arg(long, requires = "gamma")]
    pub cost: Option<f64>,
    #[arg(long, requires = "cost")]
    pub gamma: Option<f64>,
    /// Cost grid for the search.
    #[arg(long, value_delimiter = ',', conflicts_with = "cost")]
    pub costs: Option<Vec<f64>>,
    /// Gamma grid for the search.
    #[arg(long, value_delimiter = ',', conflicts_with = "gamma")]
    pub gammas: Option<Vec<f64>>,
    /// Inner folds of the grid search.
    #[arg(long, default_value_t = 3)]
    pub search_folds: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Cost of the fusion layer.
    #[arg(long, default_value_t = 1.0)]
    pub fusion_cost: f64,
    /// Fit a fusion layer even for one channel.
    #[arg(long)]
    pub always_fuse: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: ChannelArgs,
    #[command(flatten)]
    pub svm: SvmArgs,
    /// Model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: ChannelArgs,
    /// JSON-lines score file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: ChannelArgs,
    #[command(flatten)]
    pub svm: SvmArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Report file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

fn fail(code: u8, kind: &str, message: String, path: Option<String>) -> ExitCode {
    let line = ErrorLine {
        error: kind,
        message,
        path,
    };
    eprintln!("{}", serde_json::to_string(&line).expect("error line serializes"));
    ExitCode::from(code)
}

fn report_error(e: &Error) -> ExitCode {
    let (code, kind) = match e {
        Error::Io { .. } => (3, "io"),
        Error::Parse { .. } | Error::Format { .. } => (4, "parse"),
        Error::Validation { .. }
        | Error::DimensionMismatch { .. }
        | Error::UnknownImage { .. }
        | Error::MissingChannel { .. }
        | Error::Config(_) => (5, "validation"),
        Error::UndefinedCenter | Error::DegenerateTraining(_) | Error::UndefinedAp | Error::ClassTooSmall { .. } => {
            (6, "training")
        }
    };
    let path = match e {
        Error::Io { path, .. } | Error::Parse { path, .. } => Some(path.display().to_string()),
        _ => None,
    };
    fail(code, kind, e.to_string(), path)
}

fn version_text() -> String {
    format!(
        "{} (formats: {ANNOTATION_FORMAT}, {CHANNEL_FORMAT}, {MODEL_FORMAT}, {REPORT_FORMAT})",
        env!("CARGO_PKG_VERSION")
    )
}

fn parse() -> Result<Cli, clap::Error> {
    let version: &'static str = Box::leak(version_text().into_boxed_str());
    let matches = Cli::command().version(version).try_get_matches()?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let cli = match parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let message = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            return fail(2, "usage", message, None);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("FACELAYOUT_LOG")
        .init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(2, "usage", "--threads must be at least 1".into(), None);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(6, "runtime", e.to_string(), None),
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}
