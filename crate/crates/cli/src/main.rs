#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

mod commands;
mod config;
mod output;

use commands::{Command, CommandError};
use config::{Overrides, CONFIG_VERSION};

/// Weak Gibbs measures and multifractal analysis on subshifts of finite type.
#[derive(Debug, Parser)]
#[command(name = "weakgibbs", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment configuration (TOML, version = 1).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `[output].dir` or `weakgibbs-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "n-max")]
    n_max: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel loops.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let name = cli.command.name();
    let overrides = Overrides { n_max: cli.n_max, tol: cli.tol, seed: cli.seed };
    let loaded = match config::load(&cli.config, &overrides) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| loaded.config.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("weakgibbs-out"));

    let (code, report, csvs, files) = match commands::run(cli.command, &loaded) {
        Ok(outcome) => {
            let summary_csv = output::summary_csv(&outcome.summary);
            let mut csvs = outcome.csvs;
            csvs.push(summary_csv);
            let names: Vec<&str> = csvs.iter().map(|c| c.name.as_str()).chain(outcome.files.iter().map(|f| f.0.as_str())).collect();
            let report = json!({
                "command": name,
                "config_version": CONFIG_VERSION,
                "input_hash": loaded.input_hash,
                "status": if outcome.passed { "pass" } else { "fail" },
                "summary": outcome.summary,
                "files": names,
            });
            (if outcome.passed { 0 } else { 1 }, report, csvs, outcome.files)
        }
        Err(CommandError::Input(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(CommandError::Compute(e)) => {
            let report = json!({
                "command": name,
                "config_version": CONFIG_VERSION,
                "input_hash": loaded.input_hash,
                "status": "error",
                "error": e.to_string(),
            });
            eprintln!("error: {e}");
            (1, report, Vec::new(), Vec::new())
        }
    };
    if let Err(e) = output::write_all(&dir, &report, &csvs) {
        eprintln!("error: cannot write results to {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    for (fname, text) in &files {
        if let Err(e) = std::fs::write(dir.join(fname), text) {
            eprintln!("error: cannot write {fname}: {e}");
            return ExitCode::from(2);
        }
    }
    eprintln!("{}", output::status_line(name, code == 0, &dir));
    ExitCode::from(code)
}
