//! `triplayout`: ingest, train, apply, bench and gen.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use triplayout_core::gen::Shape;
use triplayout_core::storage::MeasureMode;
use triplayout_core::ErrorClass;

use crate::commands::{ApplyArgs, BenchArgs};

#[derive(Parser)]
#[command(name = "triplayout", version, about = "Learn an RDF storage layout for a query workload")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and workload and print a summary.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        workload: PathBuf,
    },
    /// Train an agent from a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rebuild a trained layout and write each query's rewrite.
    Apply {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset; defaults to the one recorded in the checkpoint.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Workload; defaults to the one recorded in the checkpoint.
        #[arg(long)]
        workload: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Roll out the network greedily instead of using the stored layout.
        #[arg(long)]
        greedy: bool,
    },
    /// Time the workload on `t0` and on a layout.
    Bench {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        workload: PathBuf,
        #[arg(long, value_enum, default_value = "cost-model")]
        mode: Mode,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Episode CSV from `train`, copied into plot data.
        #[arg(long)]
        episodes: Option<PathBuf>,
    },
    /// Write a synthetic dataset and workload.
    Gen {
        #[arg(long, value_enum, default_value = "star")]
        shape: ShapeArg,
        #[arg(long, default_value_t = 5)]
        predicates: usize,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        queries: usize,
        #[arg(long, default_value_t = config::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    CostModel,
    WallClock,
}

impl From<Mode> for MeasureMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::CostModel => MeasureMode::CostModel,
            Mode::WallClock => MeasureMode::WallClock,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ShapeArg {
    Star,
    Path,
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Star => Shape::Star,
            ShapeArg::Path => Shape::Path,
        }
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] triplayout_core::Error),
    #[error("writing output: {0}")]
    Output(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(triplayout_core::Error::HashMismatch { .. }) => 7,
            CliError::Core(e) => match e.class() {
                ErrorClass::Parse => 3,
                ErrorClass::Validation => 4,
                ErrorClass::Runtime => 5,
                ErrorClass::Io => 6,
            },
            CliError::Output(_) => 6,
        }
    }
}

fn print<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { data, workload } => print(&commands::ingest(&data, &workload)?),
        Command::Train { config } => print(&commands::train_cmd(&config)?),
        Command::Apply {
            checkpoint,
            data,
            workload,
            out,
            greedy,
        } => print(&commands::apply(ApplyArgs {
            checkpoint: &checkpoint,
            data: data.as_deref(),
            workload: workload.as_deref(),
            out: &out,
            greedy,
        })?),
        Command::Bench {
            layout,
            data,
            workload,
            mode,
            repeats,
            out,
            episodes,
        } => print(&commands::bench(BenchArgs {
            layout: &layout,
            data: &data,
            workload: &workload,
            mode: mode.into(),
            repeats,
            out: &out,
            episodes: episodes.as_deref(),
        })?),
        Command::Gen {
            shape,
            predicates,
            rows,
            queries,
            seed,
            out,
        } => {
            let (data, workload) = commands::gen(shape.into(), predicates, rows, queries, seed, &out)?;
            print(&serde_json::json!({ "data": data, "workload": workload }))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
