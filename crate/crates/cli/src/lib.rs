//! The `lookalike` command-line tool.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data or format
//! errors, 3 for numeric or training failures.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lookalike_core::{DiffMode, Error, ErrorKind, Gamma, ScoreScale};

mod commands;
mod output;

pub use output::{config_digest, header_line};

#[derive(Debug, Parser)]
#[command(
    name = "lookalike",
    version,
    about = "Doppelganger detection from face embedding differences"
)]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Embedding dimension (generated by `synth`, expected elsewhere).
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files without an explicit path.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic embedding population with train and test pairs.
    Synth(SynthArgs),
    /// Morph a source face into a target face.
    Morph(MorphArgs),
    /// Train the doppelganger detector.
    Train(TrainArgs),
    /// Score pairs with a trained detector.
    Score(ScoreArgs),
    /// Compute detection and vulnerability reports.
    Evaluate(EvaluateArgs),
    /// Cosine comparison scores and their distribution statistics.
    Stats(StatsArgs),
    /// Run an external embedding or landmark extractor over images.
    Extract(ExtractArgs),
}

/// Embeddings and pairs, from a manifest or from explicit files.
#[derive(Debug, Args, Clone, Default)]
pub struct DataArgs {
    #[arg(long, conflicts_with_all = ["embeddings", "pairs"])]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Vec<PathBuf>,
    #[arg(long)]
    pub pairs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub subjects: usize,
    #[arg(long, default_value_t = 100)]
    pub doppelganger_pairs: usize,
    /// Expected cosine similarity of doppelganger comparisons.
    #[arg(long, default_value_t = 0.5, conflicts_with = "doppelganger_angle")]
    pub doppelganger_cosine: f64,
    /// Angle between doppelganger centroids in radians.
    #[arg(long)]
    pub doppelganger_angle: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 200)]
    pub train_subjects: usize,
    /// Morph-style training pairs; defaults to the mated training pair count.
    #[arg(long)]
    pub train_morphs: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub morph_weight: f64,
    #[arg(long, default_value_t = 20_000)]
    pub nonmated: usize,
}

#[derive(Debug, Args)]
pub struct MorphArgs {
    #[arg(long, required_unless_present = "batch")]
    pub target: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    pub target_lmk: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    pub source: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    pub source_lmk: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    pub out: Option<PathBuf>,
    /// CSV of `target_png,target_lmk,source_png,source_lmk,output_png` rows.
    #[arg(long, conflicts_with_all = ["target", "target_lmk", "source", "source_lmk", "out", "emit_landmarks"])]
    pub batch: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub warp: f64,
    #[arg(long, default_value_t = 0.5)]
    pub blend: f64,
    /// Mask feathering in pixels; scales with the face width by default.
    #[arg(long)]
    pub feather: Option<u32>,
    /// Write the morph's landmarks here (batch mode writes `<output>.lmk`).
    #[arg(long)]
    pub emit_landmarks: Option<PathBuf>,
    /// Write doppelganger pair rows for the morphs to this CSV.
    #[arg(long)]
    pub pair_list: Option<PathBuf>,
    /// Also list (source, morph) as a doppelganger pair.
    #[arg(long)]
    pub include_source: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model path; defaults to `<out-dir>/model.svm`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = DiffMode::Signed)]
    pub mode: DiffMode,
    /// Subtract embeddings without unit-normalising them.
    #[arg(long)]
    pub raw: bool,
    /// Use only the listed pair order.
    #[arg(long)]
    pub no_symmetrize: bool,
    #[arg(short = 'C', long = "cost", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = Gamma::Auto)]
    pub gamma: Gamma,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_passes: usize,
    #[arg(long, default_value_t = 0.2)]
    pub calibration_fraction: f64,
    #[arg(long, default_value_t = 256)]
    pub cache_mb: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Score CSV; defaults to `<out-dir>/scores.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Detector scores (`reference_id,probe_id,score`), labelled via the pairs.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Comparison scores (`label,score`).
    #[arg(long, conflicts_with = "embeddings")]
    pub similarity: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_scale, default_value = "unit")]
    pub scale: ScoreScale,
    #[arg(long, default_value = "dataset")]
    pub dataset: String,
    #[arg(long, default_value = "detector")]
    pub configuration: String,
    /// DET points kept in the CSV; 0 keeps every step.
    #[arg(long, default_value_t = 200)]
    pub det_points: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_scale, default_value = "unit")]
    pub scale: ScoreScale,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Command template with `{input}` and `{output}` placeholders.
    #[arg(long)]
    pub command: String,
    #[arg(long, required = true, num_args = 1..)]
    pub images: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Extract landmarks (`--count` points) instead of embeddings.
    #[arg(long)]
    pub landmarks: bool,
    /// Landmark count for `--landmarks`.
    #[arg(long, default_value_t = 68)]
    pub count: usize,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = 4)]
    pub max_processes: usize,
}

fn parse_scale(s: &str) -> Result<ScoreScale, String> {
    match s {
        "unit" => Ok(ScoreScale::Unit),
        "raw" => Ok(ScoreScale::Raw),
        _ => Err(format!("expected `unit` or `raw`, got `{s}`")),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

/// Parses arguments, runs the subcommand and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialised");
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
