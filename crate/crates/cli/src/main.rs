//! `mcte`: configuration-driven experiments for maximum causal Tsallis
//! entropy imitation learning.

mod config;
mod run;
mod suite;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Kind};
use table::{compare, Table};

const EXIT_INVALID: u8 = 1;
const EXIT_CELLS: u8 = 2;
const EXIT_SUITE: u8 = 3;

#[derive(Parser)]
#[command(name = "mcte", version, about = "Run MCTE experiments and compare their summaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (variant, seed) cell of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Dotted-path override such as `trainer.alpha=0.5`; repeatable.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Merge summary CSVs into one table ranked by a metric.
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        /// Column to rank by (descending); defaults to the main metric.
        #[arg(long)]
        metric: Option<String>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite and print a pass/fail table.
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn invalid(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INVALID)
}

fn execute(config: ExperimentConfig, workers: usize) -> ExitCode {
    let report = match run::run(&config, workers) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CELLS);
        }
    };
    print!("{}", report.table.to_csv());
    eprintln!("artifacts in {}", report.out_dir.display());
    if report.failed_checks > 0 {
        eprintln!("{} property checks failed", report.failed_checks);
        return ExitCode::from(EXIT_SUITE);
    }
    if report.failed_cells > 0 {
        eprintln!("{} cells failed; see cells.csv", report.failed_cells);
        return ExitCode::from(EXIT_CELLS);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed_offset,
            overrides,
        } => {
            let mut config = match ExperimentConfig::load(&config, &overrides) {
                Ok(c) => c.with_seed_offset(seed_offset),
                Err(e) => return invalid(e),
            };
            if let Some(out) = out {
                config.out_dir = out;
            }
            execute(config, workers)
        }
        Command::Suite {
            config,
            out,
            workers,
            seed_offset,
        } => {
            let mut config = match config {
                Some(path) => match ExperimentConfig::load(&path, &[]) {
                    Ok(c) => c,
                    Err(e) => return invalid(e),
                },
                None => ExperimentConfig::parse(r#"{"kind": "property_suite", "out_dir": "runs/suite"}"#, "default", &[])
                    .expect("built-in suite config is valid"),
            };
            config.kind = Kind::PropertySuite;
            config = config.with_seed_offset(seed_offset);
            if let Some(out) = out {
                config.out_dir = out;
            }
            execute(config, workers)
        }
        Command::Compare { summaries, metric, out } => {
            let mut tables = Vec::with_capacity(summaries.len());
            for path in &summaries {
                match Table::read(path) {
                    Ok(t) => tables.push((path.display().to_string(), t)),
                    Err(e) => return invalid(e),
                }
            }
            let merged = match compare(&tables, metric.as_deref()) {
                Ok(t) => t,
                Err(e) => return invalid(e),
            };
            match out {
                Some(path) => {
                    if let Err(e) = merged.write(&path) {
                        return invalid(format!("{}: {e}", path.display()));
                    }
                }
                None => print!("{}", merged.to_csv()),
            }
            ExitCode::SUCCESS
        }
    }
}
