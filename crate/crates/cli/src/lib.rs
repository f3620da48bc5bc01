//! Command-line front end for `bayesmooth`.

pub mod args;
pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use error::{ArtifactError, CliError, CliResult};

use args::{Cli, Command};

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Command output goes to `out`, diagnostics to `err`.
pub fn run(argv: Vec<OsString>, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32 {
    let argv = match config::expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start thread pool: {e}");
            return 1;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a, out),
        Command::Predict(a) => commands::cmd_predict(a, out),
        Command::Backtest(a) => commands::cmd_backtest(a, out),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
