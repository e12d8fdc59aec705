//! Command-line front end: settings, subcommands and report writers.
//!
//! The binary is a thin wrapper around [`run`], which is also what the
//! integration tests drive.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod grid;
pub mod output;

use std::io::Write;

pub use config::{Cli, Command, Settings};
pub use error::{CliError, Result};
pub use output::{Check, Format, Report};

/// Runs a parsed command line: merges settings, executes on a pool of
/// `--threads` workers, writes the report, and returns it.
///
/// With `--check`, a failed property is reported as [`CliError::Check`]
/// after the report has been written.
pub fn run(cli: &Cli) -> Result<Report> {
    let file = cli
        .config
        .as_deref()
        .map(config::read_settings_file)
        .transpose()?;
    let settings = config::merge(&cli.command, file)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cli.threads {
            if t == 0 {
                return Err(CliError::invalid("threads", "must be at least 1"));
            }
            b = b.num_threads(t);
        }
        b.build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?
    };
    let prepared = pool.install(|| commands::execute(&cli.command, &settings))?;
    let text = prepared.report.render(prepared.format);
    match &settings.output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    for c in &prepared.report.checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        log::info!("check {}: {verdict} ({})", c.name, c.detail);
    }
    if cli.check {
        let failed = prepared.report.failed_checks();
        if !failed.is_empty() {
            let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
            return Err(CliError::Check(names.join(", ")));
        }
    }
    Ok(prepared.report)
}
