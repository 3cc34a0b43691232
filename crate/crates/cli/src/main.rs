use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ornn_cli::commands::{self, AnalyzeMode, InferArgs, UsageError};
use ornn_cli::config::{DatasetSpec, ExperimentConfig, Scale};
use ornn_core::data::SynthConfig;

#[derive(Parser)]
#[command(name = "ornn", version, about = "Optical random neural network simulator and experiment harness")]
struct Cli {
    /// Worker threads for propagation and fitness evaluation.
    #[arg(long, global = true, env = "ORNN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Search disk orientations with the genetic algorithm.
    Ga(Common),
    /// Evaluate one orientation on the full dataset.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Disk step in [0, 4096).
        #[arg(long)]
        step: Option<u32>,
        /// Manifest of a previous `ga` run; supplies step, gain and, without --config, the configuration.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Use the configured subset instead of the full dataset.
        #[arg(long)]
        subset: bool,
    },
    /// Ridge regression on raw pixels.
    Baseline(Common),
    /// Analysis sweeps: ssim, lda, bitdepth, poolsweep.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: AnalyzeMode,
        /// Kernel for poolsweep; defaults to the GA best.
        #[arg(long)]
        step: Option<u32>,
    },
    /// Write the synthetic dataset as IDX files.
    SynthData(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p, common.seed),
        None => Err(UsageError("--config is required".into()).into()),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Ga(c) => {
            let m = commands::cmd_ga(&load(&c)?, &c.out)?;
            println!("{}", m.metrics);
        }
        Command::Infer { common, step, manifest, subset } => {
            let config = common.config.as_ref().map(|p| ExperimentConfig::load(p, common.seed)).transpose()?;
            let args = InferArgs { config, step, manifest: manifest.as_deref(), use_subset: subset };
            let m = commands::cmd_infer(args, &common.out)?;
            println!("{}", m.metrics);
        }
        Command::Baseline(c) => {
            let m = commands::cmd_baseline(&load(&c)?, &c.out)?;
            println!("{}", m.metrics);
        }
        Command::Analyze { common, mode, step } => {
            let m = commands::cmd_analyze(&load(&common)?, mode, step, &common.out)?;
            println!("{}", m.metrics);
        }
        Command::SynthData(c) => {
            let cfg = match &c.config {
                Some(p) => ExperimentConfig::load(p, c.seed)?,
                None => ExperimentConfig::new(DatasetSpec::Synthetic(SynthConfig::default()), Scale::Desk, c.seed.unwrap_or(0)),
            };
            let (images, labels) = commands::cmd_synth_data(&cfg, &c.out)?;
            println!("{}\n{}", images.display(), labels.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
