//! Command-line front end for the `gafhole` laboratory: argument and config
//! resolution, the individual commands, and run-record persistence.

pub mod commands;
pub mod params;
pub mod record;

pub use commands::{execute, Outcome};
pub use params::{Cli, Command, Params};
pub use record::{Node, RunRecord};

/// Exit status of a failed run.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Numerical coverage, convergence or check failure.
    #[error("{0}")]
    Failure(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parameter(_) => 2,
            CliError::Failure(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<gafhole::Error> for CliError {
    fn from(e: gafhole::Error) -> Self {
        if e.is_parameter_error() {
            CliError::Parameter(e.to_string())
        } else {
            CliError::Failure(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Parses `args`, runs the command and writes its outputs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if let Some(msg) = &outcome.failure {
                eprintln!("check failed: {msg}");
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
