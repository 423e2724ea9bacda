//! The `pcp` command line: argument parsing, config-file merging, run
//! records and exit codes.
//!
//! Settings resolve in the order explicit flag > `--config` file > `PCP_SEED`
//! (seed only) > built-in default. Exit codes: 0 success, 1 partial or metric
//! failure, 2 usage or configuration error.

mod commands;
mod settings;

use std::ffi::OsString;
use std::fmt;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

pub use commands::{
    BaselineArgs, DatasetArgs, EstimateArgs, EvalArgs, GradcheckArgs, TrainArgs, Arch, Outputs, QueryMode, OrientMode,
};
pub use settings::{parse_analytic, Common, RunRecord, RUN_FILE};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pcp", version, about = "Point-cloud normal and curvature estimation", propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample meshes or analytic shapes into clean, noisy and density variants
    Dataset(DatasetArgs),
    /// Train a network on a dataset directory
    Train(TrainArgs),
    /// Run a trained network on point clouds
    Estimate(EstimateArgs),
    /// Run PCA or jet fitting, optionally with MST orientation
    Baseline(BaselineArgs),
    /// Score estimators on a test set and write CSV/SVG reports
    Eval(EvalArgs),
    /// Compare analytic and numeric gradients on a reduced network
    #[command(mut_arg("seed", |a| a.help("Random seed, read from PCP_SEED when the flag is absent [default: 8]")))]
    Gradcheck(GradcheckArgs),
}

/// A failure carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError { code: EXIT_FAILURE, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::MissingFile(_)
            | Error::Parse { .. }
            | Error::Checkpoint(_)
            | Error::ShapeMismatch(_)
            | Error::Json(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn dispatch(command: Command, matches: &ArgMatches) -> CliResult<()> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    debug_assert_eq!(name, command.name());
    match command {
        Command::Dataset(a) => commands::dataset(settings::resolve(a, sub)?),
        Command::Train(a) => commands::train(settings::resolve(a, sub)?),
        Command::Estimate(a) => commands::estimate(settings::resolve(a, sub)?),
        Command::Baseline(a) => commands::baseline(settings::resolve(a, sub)?),
        Command::Eval(a) => commands::eval(settings::resolve(a, sub)?),
        Command::Gradcheck(a) => commands::gradcheck(settings::resolve(a, sub)?),
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dataset(_) => "dataset",
            Command::Train(_) => "train",
            Command::Estimate(_) => "estimate",
            Command::Baseline(_) => "baseline",
            Command::Eval(_) => "eval",
            Command::Gradcheck(_) => "gradcheck",
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Help and version requests exit 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command, &matches) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
