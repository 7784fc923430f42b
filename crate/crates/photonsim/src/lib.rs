//! Command-line front end and file formats for `photonsim-core`.

pub mod cli;
pub mod commands;
pub mod error;
pub mod float;
pub mod io;
pub mod manifest;
pub mod trace;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use cli::Cli;
pub use commands::Outcome;
pub use error::{CliError, Result};

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Outcome { stdout: e.to_string(), ..Outcome::default() });
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            return Err(CliError::Usage("missing subcommand; see --help".into()));
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::Usage(first.trim_start_matches("error: ").to_string()));
        }
    };
    run_cli(&cli)
}

pub fn run_cli(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        cli::Command::Replay(r) => replay(&r.manifest, cli),
        _ => commands::execute(cli),
    }
}

/// Re-runs a recorded command; an explicit `--out` redirects its outputs.
fn replay(path: &std::path::Path, outer: &Cli) -> Result<Outcome> {
    let m = manifest::read(path)?;
    let argv = std::iter::once("photonsim".to_string()).chain(m.argv.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        field: "argv".into(),
        message: e.to_string().lines().next().unwrap_or_default().to_string(),
    })?;
    if matches!(cli.command, cli::Command::Replay(_)) {
        return Err(CliError::Usage("a manifest cannot replay another replay".into()));
    }
    if outer.out.is_some() {
        cli.out = outer.out.clone();
    }
    commands::execute(&cli)
}
