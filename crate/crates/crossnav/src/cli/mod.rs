//! Command-line harness: config parsing, dataset generation, training
//! phases, evaluation, checkpointing, and trace emission.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod lock;
pub mod trace;

pub use checkpoint::{load_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CKPT_MAGIC};
pub use commands::{grad_check_battery, GradCheckOutcome, DATASET_FILE};
pub use config::{config_to_text, parse_config, RunConfig};
pub use lock::DirLock;
pub use trace::{parse_trace, TraceRecord, TraceWriter, TRACE_HEADER};

use crate::learner::{Phase, SilMode};
use crate::worldsim::Split;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "crossnav",
    version,
    about = "Instruction-following navigation on procedural graph worlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the train / seen-val / unseen-val dataset.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the dataset generation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pre-train the matching critic on demonstration pairs.
    PretrainCritic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the wall-clock line in the trace header.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Supervised warm start from a critic checkpoint.
    TrainSl {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Replacement config (dimensions must match the checkpoint).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Mixed-reward REINFORCE from an SL checkpoint.
    TrainRl {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Self-imitation on the chosen split (no demonstrations touched).
    TrainSil {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Which split to imitate on: train or unseen.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Evaluate a checkpoint: PL / NE / OSR / SR / SPL per split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Run directory holding dataset.world; also receives eval.trace.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to one split (train, seen_val, unseen_val).
        #[arg(long)]
        split: Option<String>,
        /// Parallel evaluation workers.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Verify analytic gradients against finite differences.
    GradCheck,
    /// Re-emit a trace file's records in canonical form.
    TraceDump {
        #[arg(long)]
        trace: PathBuf,
    },
}

/// Entry point for the `crossnav` binary. Returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> crate::error::Result<i32> {
    match cli.command {
        Command::GenData { config, out, seed } => {
            commands::cmd_gen_data(&config, &out, seed)?;
            Ok(0)
        }
        Command::PretrainCritic {
            config,
            out,
            seed,
            no_timestamp,
        } => {
            commands::cmd_train_phase(
                Phase::Critic,
                Some(&config),
                &out,
                None,
                seed,
                None,
                !no_timestamp,
            )?;
            Ok(0)
        }
        Command::TrainSl {
            out,
            checkpoint,
            config,
            no_timestamp,
        } => {
            commands::cmd_train_phase(
                Phase::Sl,
                config.as_deref(),
                &out,
                Some(&checkpoint),
                None,
                None,
                !no_timestamp,
            )?;
            Ok(0)
        }
        Command::TrainRl {
            out,
            checkpoint,
            config,
            no_timestamp,
        } => {
            commands::cmd_train_phase(
                Phase::Rl,
                config.as_deref(),
                &out,
                Some(&checkpoint),
                None,
                None,
                !no_timestamp,
            )?;
            Ok(0)
        }
        Command::TrainSil {
            out,
            checkpoint,
            mode,
            config,
            no_timestamp,
        } => {
            let sil = SilMode::parse(&mode).ok_or_else(|| {
                crate::error::Error::InvalidArgument(format!(
                    "--mode must be train or unseen, got {mode:?}"
                ))
            })?;
            commands::cmd_train_phase(
                Phase::Sil,
                config.as_deref(),
                &out,
                Some(&checkpoint),
                None,
                Some(sil),
                !no_timestamp,
            )?;
            Ok(0)
        }
        Command::Eval {
            checkpoint,
            out,
            split,
            workers,
            no_timestamp,
        } => {
            let split = match split {
                Some(s) => Some(Split::parse(&s).ok_or_else(|| {
                    crate::error::Error::InvalidArgument(format!(
                        "--split must be train, seen_val, or unseen_val, got {s:?}"
                    ))
                })?),
                None => None,
            };
            commands::cmd_eval(&checkpoint, out.as_deref(), split, workers, !no_timestamp)?;
            Ok(0)
        }
        Command::GradCheck => {
            let ok = commands::cmd_grad_check()?;
            Ok(if ok { 0 } else { 1 })
        }
        Command::TraceDump { trace } => {
            commands::cmd_trace_dump(&trace)?;
            Ok(0)
        }
    }
}
