//! Command-line driver for the coupling and mixing experiments.
//!
//! Exit codes: 0 when the command's own test passes, 1 when it fails (or
//! is inconclusive), 2 for configuration and I/O errors, 3 for numerical
//! failures.

pub mod commands;
pub mod config;
pub mod suites;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ctrlmix_core::io::write_json;
use ctrlmix_core::{Error, Exec};

use crate::commands::{Outcome, Suite};
use crate::config::{ExperimentConfig, Preset};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ctrlmix", version, about = "Coupling and mixing-rate experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment config; overrides --preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in config used when no file is given.
    #[arg(long, global = true, value_enum, default_value = "toy")]
    pub preset: Preset,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the system along one noise path.
    Simulate,
    /// Estimate the exponential mixing rate from two initial conditions.
    MixRate,
    /// Run a verification suite and write its JSON verdict.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Exact stationary law of the 1-D toy against simulation.
    ToyOracle,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
        Error::Inconclusive(_) | Error::Infeasible(_) | Error::StabiliserDomain { .. } => EXIT_FAIL,
        Error::Blowup { .. }
        | Error::SupportTooLarge { .. }
        | Error::GridMismatch(_)
        | Error::SingularMap(_)
        | Error::RejectionCap(_)
        | Error::NoConvergence(_)
        | Error::Resolution { .. } => EXIT_NUMERICAL,
    }
}

/// Loads, overrides and validates the config, then writes it to `out`.
pub fn resolve_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => common.preset.config(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&common.out)?;
    write_json(&common.out.join("config.json"), &cfg)?;
    Ok(cfg)
}

fn exec_for(jobs: Option<usize>) -> Exec {
    match jobs {
        Some(1) => Exec::Sequential,
        Some(j) => {
            // A pool may already exist when called as a library.
            let _ = ctrlmix_core::par::set_workers(j);
            Exec::Parallel
        }
        None => Exec::Parallel,
    }
}

fn execute(cli: &Cli) -> Result<Outcome, Error> {
    let cfg = resolve_config(&cli.common)?;
    let exec = exec_for(cli.common.jobs);
    let out = &cli.common.out;
    match &cli.command {
        Command::Simulate => commands::simulate(&cfg, out),
        Command::MixRate => commands::mix_rate(&cfg, out, exec),
        Command::Verify { suite } => commands::verify(&cfg, *suite, out, exec),
        Command::ToyOracle => commands::toy_oracle(&cfg, out),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    match execute(&cli) {
        Ok(o) => {
            println!("{}", o.summary);
            if o.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
