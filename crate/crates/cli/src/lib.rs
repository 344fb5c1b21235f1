//! Batch command surface of the bubble-tower laboratory.

pub mod args;
pub mod commands;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

pub use args::{parse_args, RunConfig};
pub use commands::{run, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Clap(#[from] clap::Error),
    #[error("numerical failure: {0}")]
    Numerical(#[from] bubble_tower::Error),
    #[error("output failed: {0}")]
    Io(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Clap(e) if !e.use_stderr() => EXIT_OK,
            CliError::Clap(_) => EXIT_USAGE,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

/// Parses, runs and reports; returns the process exit status.
pub fn main_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let fail = |stderr: &mut dyn Write, e: &CliError| {
        let _ = match e {
            CliError::Clap(c) => {
                let text = c.render().to_string();
                writeln!(stderr, "{}", text.lines().next().unwrap_or_default())
            }
            other => writeln!(stderr, "error: {other}"),
        };
        e.exit_code()
    };
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(CliError::Clap(c)) if !c.use_stderr() => {
            let _ = write!(stdout, "{}", c.render());
            return EXIT_OK;
        }
        Err(e) => return fail(stderr, &e),
    };
    match run(&config, stdout) {
        Ok(outcome) => {
            for msg in &outcome.diagnostics {
                let _ = writeln!(stderr, "warning: {msg}");
            }
            if outcome.all_ok {
                EXIT_OK
            } else {
                EXIT_NUMERICAL
            }
        }
        Err(e) => fail(stderr, &e),
    }
}
