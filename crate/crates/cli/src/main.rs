mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{PipelineConfig, Phases};

#[derive(Parser)]
#[command(name = "shockwave", version, about = "Traffic shockwave prediction pipeline")]
struct Cli {
    /// JSON pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for runs, split, initialisation and shuffling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate runs and write one trajectory CSV per run.
    Simulate {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn trajectory CSVs into a TSDS pair file with a split sidecar.
    BuildDataset {
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the encoder-decoder and write a checkpoint and report.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum)]
        phases: Option<Phases>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        pairs_per_run: Option<usize>,
    },
    /// Print model and persistence-baseline metrics.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: commands::SplitName,
    },
    /// Render input, target and prediction heatmaps of one pair.
    Predict {
        #[arg(long)]
        index: usize,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.training.seed = seed;
    }
    fn set<T>(slot: &mut T, value: Option<T>) {
        if let Some(v) = value {
            *slot = v;
        }
    }
    match cli.command {
        Command::Simulate { runs, out } => {
            set(&mut cfg.runs, runs);
            set(&mut cfg.trajectory_dir, out);
            cfg.validate()?;
            commands::simulate(&cfg)
        }
        Command::BuildDataset { trajectories, out } => {
            set(&mut cfg.trajectory_dir, trajectories);
            set(&mut cfg.dataset, out);
            cfg.validate()?;
            commands::build_dataset(&cfg)
        }
        Command::Train {
            dataset,
            checkpoint,
            report,
            phases,
            batch_size,
            patience,
            max_epochs,
            pairs_per_run,
        } => {
            set(&mut cfg.dataset, dataset);
            set(&mut cfg.checkpoint, checkpoint);
            set(&mut cfg.report, report);
            set(&mut cfg.phases, phases);
            set(&mut cfg.training.batch_size, batch_size);
            set(&mut cfg.training.patience, patience);
            set(&mut cfg.training.max_epochs, max_epochs);
            if pairs_per_run.is_some() {
                cfg.pairs_per_run = pairs_per_run;
            }
            cfg.validate()?;
            commands::train(&cfg)
        }
        Command::Evaluate {
            dataset,
            checkpoint,
            split,
        } => {
            set(&mut cfg.dataset, dataset);
            set(&mut cfg.checkpoint, checkpoint);
            commands::evaluate(&cfg, split)
        }
        Command::Predict {
            index,
            dataset,
            checkpoint,
            out,
        } => {
            set(&mut cfg.dataset, dataset);
            set(&mut cfg.checkpoint, checkpoint);
            set(&mut cfg.render_dir, out);
            commands::predict(&cfg, index)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
