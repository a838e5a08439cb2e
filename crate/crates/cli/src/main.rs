// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use filter_bounds::experiments::{
    parse_grid, run_custom, run_fig1, run_fig2, run_fig3, to_csv, ExperimentConfig, Fig3Config, Layout, FIG2_TARGETS,
};
use filter_bounds::probe::ProbeChoice;

/// Analytical and SDP process-fidelity bounds for quantum filters.
#[derive(Debug, Parser)]
#[command(name = "filter-bounds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lower bound for the ideal PPBS filter against transmittance.
    Fig1 {
        #[arg(long, default_value = "0.05:1.0:0.01")]
        tv_grid: String,
        /// Output CSV; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower bound and true fidelity for ideal PPBS channels scored against fixed targets.
    Fig2 {
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
        #[arg(long, default_value = "0.05:1.0:0.01")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytical and SDP bounds for random mixtures around a PPBS target.
    Fig3 {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value = "product")]
        probes: ProbeChoice,
        #[arg(long, default_value_t = 0.5)]
        target_tv: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use this mixing weight for every channel.
        #[arg(long)]
        force_p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline from a JSON configuration; prints a JSON report.
    Custom {
        #[arg(long)]
        config: PathBuf,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fig1 { tv_grid, out } => {
            let rows = run_fig1(&parse_grid(&tv_grid)?)?;
            emit(out.as_deref(), &to_csv(Layout::Fig1, &rows))
        }
        Command::Fig2 { targets, grid, out } => {
            let targets = targets.unwrap_or_else(|| FIG2_TARGETS.to_vec());
            let rows = run_fig2(&targets, &parse_grid(&grid)?)?;
            emit(out.as_deref(), &to_csv(Layout::Fig2, &rows))
        }
        Command::Fig3 { count, probes, target_tv, seed, force_p, out } => {
            let rows = run_fig3(&Fig3Config { count, probes, target_tv, seed, force_p })?;
            let broken = rows.iter().filter(|r| !r.sandwich_holds(1e-6)).count();
            if broken > 0 {
                eprintln!("warning: {broken} rows violate the bound ordering at 1e-6");
            }
            emit(out.as_deref(), &to_csv(Layout::Fig3, &rows))
        }
        Command::Custom { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            let base = config.parent().unwrap_or(Path::new("."));
            let report = run_custom(&cfg, base)?;
            let mut json = serde_json::to_string_pretty(&report)?;
            json.push('\n');
            emit(cfg.out.as_ref().map(|p| base.join(p)).as_deref(), &json)
        }
    }
}

fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
