//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime or numerical failure,
//! 3 a checked bound or oracle comparison failed.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

pub use commands::{builtin_are_requests, Outcome};
pub use config::RunConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SEQMT_OUT_DIR";

/// Output directory used when neither flag, environment nor config set one.
pub const DEFAULT_OUT_DIR: &str = "out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "seqmt", version, about = "Sequential multiple testing over parallel data streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed; overrides `[experiment] seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR", env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,

    /// Built-in preset (see `list-recipes`).
    #[arg(long, global = true, value_name = "NAME")]
    pub recipe: Option<String>,

    /// Keep sweep points whose replications hit the horizon, marked truncated.
    #[arg(long, global = true)]
    pub allow_partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Thresholds meeting familywise error targets.
    Calibrate,
    /// Expected decision time against error rate curves.
    Sweep,
    /// Exact asymptotic relative efficiency tables.
    Are,
    /// Exact Bernoulli enumeration against simulation.
    Oracle,
    /// Built-in presets.
    ListRecipes,
}

/// Exit code of a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Precondition(_) | Error::EnumerationTooLarge(_) => EXIT_VALIDATION,
        Error::SweepPoint { source, .. } => exit_code(source),
        _ => EXIT_RUNTIME,
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads must be >= 1"));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    commands::dispatch(cli, config)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            if outcome.acceptance_failed {
                EXIT_ACCEPTANCE
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_shape() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["seqmt", "sweep", "--recipe", "homo-gap", "--seed", "5", "--allow-partial"]).unwrap();
        assert_eq!(cli.command, Command::Sweep);
        assert_eq!(cli.seed, Some(5));
        assert!(cli.allow_partial);
        assert!(Cli::try_parse_from(["seqmt", "bogus"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config("x")), EXIT_VALIDATION);
        assert_eq!(
            exit_code(&Error::Numerical {
                stream: 0,
                message: "x".into()
            }),
            EXIT_RUNTIME
        );
        let wrapped = Error::SweepPoint {
            kind: "k".into(),
            config: "{1}".into(),
            free_parameter: 2.0,
            source: Box::new(Error::Precondition("p".into())),
        };
        assert_eq!(exit_code(&wrapped), EXIT_VALIDATION);
    }
}
