//! `vjcal`: synthesize, calibrate and analyse virtual-joint robot models.
//!
//! Exit codes: 0 ok, 2 input error, 3 unusable dataset, 4 numerical failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "vjcal", version, about = "Static calibration of six-axis robots with virtual joints")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a ground truth and synthesize a measurement dataset.
    Synth(SynthArgs),
    /// Filter a dataset and calibrate one model variant.
    Calibrate(CalibrateArgs),
    /// Position errors of a calibration result on a dataset.
    Evaluate(EvaluateArgs),
    /// Temporal k-fold cross-validation over several variants.
    Crossval(CrossvalArgs),
    /// Validation error against the amount of training data.
    ReduceStudy(ReduceArgs),
    /// Per-submodel singular value spectra at a calibration result.
    Spectra(ResultArgs),
    /// Project residuals onto single joints and bin them along each joint.
    ProjectResiduals(ProjectArgs),
    /// ISO 9283 style pose repeatability from clustered measurements.
    Repeatability(RepeatabilityArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Robot description (TOML).
    #[arg(long)]
    robot: PathBuf,
    /// Synthesis recipe (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the recipe's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Options shared by every command that fits a model.
#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    robot: PathBuf,
    /// Measurement CSV.
    #[arg(long)]
    dataset: PathBuf,
    /// Run configuration (TOML): filter thresholds, folds, solver settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Support points per radian of the joint-correction curves.
    #[arg(long)]
    d_supp: Option<f64>,
    #[arg(long)]
    lambda_gn: Option<f64>,
    #[arg(long)]
    lambda_j: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Submodels to identify, e.g. G, GC, GCT or GCTJ.
    #[arg(long, default_value = "GCTJ")]
    variant: String,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Calibration result (JSON) written by `calibrate`.
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CrossvalArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Comma-separated variants.
    #[arg(long, default_value = "G,GC,GCT,GCTJ")]
    variant: String,
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, default_value = "GCTJ")]
    variant: String,
    #[arg(long)]
    folds: Option<usize>,
    /// Ascending training-set sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    /// Seed of the training subsets.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ResultArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[command(flatten)]
    inputs: ResultArgs,
    /// Bin density (bins per radian).
    #[arg(long, default_value_t = vjcal_core::submodels::DEFAULT_D_SUPP)]
    d_supp: f64,
    /// Bins with fewer samples are dropped.
    #[arg(long, default_value_t = vjcal_core::data::DEFAULT_MIN_COUNT)]
    min_count: usize,
    /// Half-width (in bins) of the moving average.
    #[arg(long, default_value_t = 2)]
    smooth: usize,
}

#[derive(Debug, Args)]
struct RepeatabilityArgs {
    /// `cluster,timestamp,x,y,z` CSV (mm, s).
    #[arg(long)]
    dataset: PathBuf,
    /// Rolling-mean window for drift removal (s).
    #[arg(long, default_value_t = vjcal_core::diagnostics::repeatability::DEFAULT_DRIFT_WINDOW_S)]
    window: f64,
    /// Use plain cluster means instead of removing drift.
    #[arg(long)]
    no_drift: bool,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<vjcal_core::Error> for CliError {
    fn from(e: vjcal_core::Error) -> Self {
        let code = if e.is_numerical() {
            4
        } else if e.is_unusable_dataset() || matches!(e, vjcal_core::Error::EmptyDataset) {
            3
        } else {
            2
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Crossval(a) => commands::crossval(a),
        Command::ReduceStudy(a) => commands::reduce_study(a),
        Command::Spectra(a) => commands::spectra(a),
        Command::ProjectResiduals(a) => commands::project_residuals(a),
        Command::Repeatability(a) => commands::repeatability(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
