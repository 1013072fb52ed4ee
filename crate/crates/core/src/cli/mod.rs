//! Command-line surface: `generate`, `train`, `eval` and `inspect`.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{
    cmd_eval, cmd_generate, cmd_inspect, cmd_train, prepare_data, EvalSummary, GenerateSummary, InspectReport,
    PreparedData, RunReport, SyntheticSummary, Timing, Truth, ARCHIVE_FILE, DATA_FILE, REPORT_FILE, SIDECAR_FILE,
    TIMING_FILE,
};
pub use config::{DataConfig, RunConfig, SyntheticConfig};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "eulernet",
    version,
    about = "Euler-formula feature interaction models for CTR prediction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and its sidecar.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides synthetic.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model and write the archive and run report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Overrides train.init_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate an archive on one split of the configured data.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        archive: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        /// Also write the metrics as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the first layer's order vectors, their histogram and, with a
    /// sidecar, the deviation from the planted pattern.
    Inspect {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// 1 for configuration problems, 3 for file problems, 2 for everything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Io { .. } | Error::Parse { .. } | Error::Archive(_) => 3,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                config
                    .synthetic
                    .as_mut()
                    .ok_or_else(|| Error::Config("missing [synthetic] section".into()))?
                    .seed = seed;
            }
            cmd_generate(&config, &out)?;
        }
        Command::Train { config, out, seed } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                config.train.init_seed = seed;
            }
            let report = cmd_train(&config, &out)?;
            println!("parameters {}  written to {}", report.parameter_count, out.display());
        }
        Command::Eval {
            config,
            archive,
            split,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            let summary = cmd_eval(&config, &archive, split.name(), 0)?;
            if let Some(out) = out {
                commands::write_json(&summary, &out)?;
            }
        }
        Command::Inspect { archive, sidecar, out } => {
            let report = cmd_inspect(&archive, sidecar.as_deref())?;
            match out {
                Some(out) => commands::write_json(&report, &out)?,
                None => {
                    // a closed pipe (e.g. `| head`) is not an error
                    let _ = writeln!(std::io::stdout(), "{}", commands::json_string(&report));
                }
            }
        }
    }
    Ok(())
}
