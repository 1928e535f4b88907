use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use scn_cache_core::StorageGrid;
use scn_cache_sim::experiments::{scaling_summary, SolverChoice};
use scn_cache_sim::output::write_csv;
use scn_cache_sim::{
    choose_solver, load_scenario, run_baseline_comparison, run_design, run_misreport_sweep,
    run_scaling_study, run_verify, LoadedScenario,
};

/// Cache storage contracts for small-cell networks.
#[derive(Parser)]
#[command(name = "scn-cache", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Storage grid step in bits, overriding the scenario file.
    #[arg(long, global = true)]
    grid_step: Option<f64>,
    /// Exhaustive allocation.
    #[arg(long, global = true, conflicts_with = "heuristic")]
    exact: bool,
    /// Swap-based deferred acceptance allocation.
    #[arg(long, global = true)]
    heuristic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Truthful contracts for the scenario.
    Design { config: PathBuf },
    /// IC, ex-post IR, budget balance and price monotonicity checks.
    Verify { config: PathBuf },
    /// Utility and backhaul volume of every declaration of every CP.
    SweepMisreport { config: PathBuf },
    /// Mechanism against an equal storage split.
    Baseline { config: PathBuf },
    /// Mean CP utility across CP counts, Zipf exponents and seeds.
    Scaling {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        cps: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,2.0")]
        alphas: Vec<f64>,
        /// Inclusive range `a..b` or a comma-separated list.
        #[arg(long, default_value = "1..20", value_parser = parse_seeds)]
        seeds: SeedList,
    },
}

#[derive(Clone)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|e| format!("bad seed range start: {e}"))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|e| format!("bad seed range end: {e}"))?;
        if a > b {
            return Err(format!("empty seed range {a}..{b}"));
        }
        return Ok(SeedList((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|e| format!("bad seed {x:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(SeedList)
}

impl Common {
    fn choice(&self) -> SolverChoice {
        if self.exact {
            SolverChoice::Exact
        } else if self.heuristic {
            SolverChoice::Heuristic
        } else {
            SolverChoice::Auto
        }
    }

    fn load(&self, path: &Path) -> anyhow::Result<LoadedScenario> {
        let mut loaded = load_scenario(path)?;
        if let Some(step) = self.grid_step {
            loaded.scenario.grid = StorageGrid::new(step, loaded.scenario.capacity())?;
            loaded.config.grid_step = Some(step);
        }
        Ok(loaded)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Returns whether every feasibility check passed.
fn run(cli: &Cli) -> anyhow::Result<bool> {
    let common = &cli.common;
    let out = &common.out;
    match &cli.command {
        Command::Design { config } => {
            let loaded = common.load(config)?;
            let solver = choose_solver(&loaded.scenario, common.choice(), loaded.config.max_rounds);
            let (design, rows) = run_design(&loaded, solver)?;
            write_csv(&out.join("contracts.csv"), &rows)?;
            println!(
                "{} allocation in {} rounds: welfare {:.6}, operator utility {:.6}",
                if solver.is_exact() {
                    "exact"
                } else {
                    "heuristic"
                },
                design.allocation.rounds,
                design.report.social_welfare,
                design.report.mno_utility,
            );
            for r in &rows {
                println!(
                    "cp {} type {}: storage {:.0} bits, price {:.6}, utility {:.6}",
                    r.cp, r.true_type, r.storage_bits, r.price, r.utility
                );
            }
        }
        Command::Verify { config } => {
            let loaded = common.load(config)?;
            let solver = choose_solver(&loaded.scenario, common.choice(), loaded.config.max_rounds);
            let report = run_verify(&loaded, solver)?;
            write_csv(&out.join("verify.csv"), &report.rows)?;
            for r in &report.rows {
                let cp =
                    r.cp.map_or_else(|| "all".to_string(), |k| format!("cp {k}"));
                println!(
                    "{:<24} {:<6} {:>16.6e}  {}",
                    r.check,
                    cp,
                    r.value,
                    r.status.label()
                );
            }
            return Ok(report.passed());
        }
        Command::SweepMisreport { config } => {
            let loaded = common.load(config)?;
            let solver = choose_solver(&loaded.scenario, common.choice(), loaded.config.max_rounds);
            let rows = run_misreport_sweep(&loaded, solver)?;
            write_csv(&out.join("misreport.csv"), &rows)?;
            println!(
                "{} rows written to {}",
                rows.len(),
                out.join("misreport.csv").display()
            );
        }
        Command::Baseline { config } => {
            let loaded = common.load(config)?;
            let solver = choose_solver(&loaded.scenario, common.choice(), loaded.config.max_rounds);
            let rows = run_baseline_comparison(&loaded, solver)?;
            write_csv(&out.join("baseline.csv"), &rows)?;
            for r in &rows {
                println!(
                    "cp {} type {}: mechanism {:.6}, equal split {:.6}",
                    r.cp, r.true_type, r.utility_mechanism, r.utility_equal_split
                );
            }
        }
        Command::Scaling {
            config,
            cps,
            alphas,
            seeds,
        } => {
            let mut template = common.load(config)?.config;
            if cps.is_empty() || alphas.is_empty() {
                bail!("--cps and --alphas need at least one value");
            }
            template.grid_step = common.grid_step.or(template.grid_step);
            let rows = run_scaling_study(&template, cps, alphas, &seeds.0, common.choice())
                .context("scaling study")?;
            write_csv(&out.join("scaling.csv"), &rows)?;
            let summary = scaling_summary(&rows);
            write_csv(&out.join("scaling_summary.csv"), &summary)?;
            for c in &summary {
                println!(
                    "cps {} alpha {}: mean utility {:.6} over {} seeds",
                    c.cp_count, c.alpha, c.mean_utility, c.seeds
                );
            }
        }
    }
    Ok(true)
}
