//! Command-line front end for the hindlab experiments.

pub mod args;
pub mod commands;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use hindlab_core::model::MemoryBudget;
use serde::Serialize;
use serde_json::Value;

use args::{Cli, Command};
use commands::Context;

/// Environment variable overriding the memory budget, in bytes.
pub const MEMORY_ENV: &str = "HINDLAB_MEMORY_BYTES";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RESOURCE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Core(hindlab_core::Error),
    Io(std::io::Error),
}

impl From<hindlab_core::Error> for CliError {
    fn from(e: hindlab_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_resource() => EXIT_RESOURCE,
            _ => EXIT_INVALID,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid argument: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

fn memory_budget() -> Result<MemoryBudget, CliError> {
    match std::env::var(MEMORY_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(MemoryBudget::new)
            .map_err(|_| CliError::Invalid(format!("{MEMORY_ENV} must be a byte count, got {v:?}"))),
        Err(_) => Ok(MemoryBudget::default()),
    }
}

fn resolved_config<T: Serialize>(args: &T, cli: &Cli, budget: MemoryBudget) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(args).map_err(|e| CliError::Invalid(e.to_string()))?;
    v["seed"] = cli.seed.into();
    v["memory_bytes"] = budget.bytes.into();
    Ok(v)
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<String, CliError> {
    let budget = memory_budget()?;
    let ctx = Context { seed: cli.seed, budget, timing: cli.timing, start: Instant::now() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start {} workers: {e}", cli.workers)))?;
    let (config, report) = pool.install(|| -> Result<_, CliError> {
        Ok(match &cli.command {
            Command::Sample(a) => (resolved_config(a, cli, budget)?, commands::sample(a, &ctx)?),
            Command::Probes(a) => (resolved_config(a, cli, budget)?, commands::probes(a, &ctx)?),
            Command::Quadruples(a) => (resolved_config(a, cli, budget)?, commands::quadruples(a, &ctx)?),
            Command::SecondMoment(a) => (resolved_config(a, cli, budget)?, commands::second_moment(a, &ctx)?),
            Command::Clt(a) => (resolved_config(a, cli, budget)?, commands::clt_cmd(a, &ctx)?),
            Command::Color(a) => (resolved_config(a, cli, budget)?, commands::color_cmd(a, &ctx)?),
            Command::Threshold(a) => (resolved_config(a, cli, budget)?, commands::threshold(a, &ctx)?),
        })
    })?;
    let format = cli.format.unwrap_or(report.default_format);
    let bytes = output::render(cli.command.name(), &config, &report, format)?;
    match &cli.out {
        Some(path) => std::fs::write(path, &bytes).map_err(CliError::Io)?,
        None => stdout.write_all(&bytes).map_err(CliError::Io)?,
    }
    Ok(report.summary)
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Data goes to `stdout` or `--out`; the one-line
/// summary and errors go to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(summary) => {
            let _ = writeln!(stderr, "{summary}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
