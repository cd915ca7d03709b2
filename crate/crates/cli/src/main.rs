//! `nllvm-lab <estimate|vi|verify <check-name>|contract> [flags]`
//!
//! Writes a JSON report to `--out` and plot data beside it as CSV. Exit
//! status is 0 on success, 1 when the experiment fails, 2 on usage errors.

mod args;
mod commands;
mod data;
mod report;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};
use report::{sidecar_path, write_report, write_table, PlotData};

const THREADS_VAR: &str = "NLLVM_LAB_THREADS";

fn usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if !nllvm_core::exec::set_max_threads(n) {
                    tracing::warn!("{THREADS_VAR} ignored: the worker pool is already configured");
                }
            }
            _ => return usage(&format!("{THREADS_VAR} must be a positive integer, got {v:?}")),
        }
    }

    let start = Instant::now();
    let (out, outcome) = match &cli.command {
        Command::Estimate(a) => (&a.common.out, commands::estimate(a)),
        Command::Vi(a) => (&a.common.out, commands::vi(a)),
        Command::Verify(a) => (&a.common.out, commands::verify(a)),
        Command::Contract(a) => (&a.common.out, commands::contract(a)),
    };
    let (mut report, table) = match outcome {
        Ok(v) => v,
        Err(commands::UsageError(msg)) => return usage(&msg),
    };

    if !table.columns.is_empty() {
        let path = sidecar_path(out);
        if let Err(e) = write_table(&path, &table) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(1);
        }
        report.plot_data = Some(PlotData { path: path.display().to_string(), columns: table.columns.clone() });
    }
    report.runtime_ms = start.elapsed().as_millis() as u64;
    if let Err(e) = write_report(out, &report) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return ExitCode::from(1);
    }

    if let Some(err) = &report.error {
        eprintln!("error: {err}");
    }
    match report.pass {
        Some(false) => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    }
}
