//! `dgplan`: load flow, loss-sensitivity ranking and DG sizing studies on
//! meshed transmission networks.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dgplan_core::error::ExperimentError;
use dgplan_core::experiment::{
    load_run_dir, resolve_out_dir, run_experiment, verify_report, write_run_dir, AlgorithmChoice,
    ExperimentConfig, ModeChoice,
};
use dgplan_core::objectives::voltage_deviation;
use dgplan_core::powerflow::StartPoint;
use dgplan_core::sensitivity::rank;
use dgplan_core::{caseio, cases, Network, SolveOptions};

#[derive(Parser)]
#[command(
    name = "dgplan",
    about = "AC load flow, LSF bus ranking and metaheuristic DG sizing",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the AC load flow for a case and print the bus table.
    Solve {
        /// Case file path or builtin name (ieee14, ieee30).
        case: String,
        /// Convergence tolerance on the largest per-unit mismatch.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Iteration cap.
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
    /// Rank buses by loss sensitivity and print the table as CSV.
    Lsf {
        /// Case file path or builtin name (ieee14, ieee30).
        case: String,
        /// Print only the first K candidate buses after the full table.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the two-stage sizing study and write a run directory.
    Optimize(OptimizeArgs),
    /// Print a human-readable summary of a run directory.
    Report {
        /// Directory written by `dgplan optimize`.
        run_dir: PathBuf,
    },
    /// Re-derive every reported loss from the stored sizes and case file.
    Verify {
        /// Directory written by `dgplan optimize`.
        run_dir: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Pso,
    Woa,
    Both,
}

impl From<AlgoArg> for AlgorithmChoice {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Pso => AlgorithmChoice::Pso,
            AlgoArg::Woa => AlgorithmChoice::Woa,
            AlgoArg::Both => AlgorithmChoice::Both,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Technical,
    #[value(name = "techno-economic")]
    TechnoEconomic,
    Both,
}

impl From<ModeArg> for ModeChoice {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Technical => ModeChoice::Technical,
            ModeArg::TechnoEconomic => ModeChoice::TechnoEconomic,
            ModeArg::Both => ModeChoice::Both,
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// Case file path or builtin name (ieee14, ieee30).
    case: Option<String>,
    /// JSON experiment config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Comma-separated RNG seeds (default 1..=10).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Candidate count for the LSF stage.
    #[arg(long)]
    k: Option<usize>,
    /// Pin the candidate buses, bypassing the ranking (comma-separated ids).
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    /// Lower DG size bound, MW.
    #[arg(long)]
    dg_min: Option<f64>,
    /// Upper DG size bound, MW.
    #[arg(long)]
    dg_max: Option<f64>,
    /// Swarm population.
    #[arg(long)]
    pop: Option<usize>,
    /// Optimizer iteration budget.
    #[arg(long)]
    iters: Option<usize>,
    /// Uniform voltage band override, "lo,hi" in per-unit.
    #[arg(long)]
    v_band: Option<String>,
    /// Weight of the normalized cost term in techno-economic mode.
    #[arg(long)]
    cost_weight: Option<f64>,
    /// Output directory (DGPLAN_OUT env var overrides).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors that should exit with the usage/config code.
struct ConfigUsageError(anyhow::Error);

fn load_network(case: &str) -> anyhow::Result<Network> {
    match cases::builtin(case) {
        Some(text) => Ok(caseio::parse_case_text(text)?),
        None => Ok(caseio::read_case_file(Path::new(case))?),
    }
}

fn cmd_solve(case: &str, tol: f64, max_iter: usize) -> anyhow::Result<()> {
    let network = load_network(case)?;
    let report = dgplan_core::validate_network(&network);
    if !report.is_empty() {
        return Err(anyhow!("case failed validation:\n{report}"));
    }
    let options = SolveOptions {
        tolerance: tol,
        max_iterations: max_iter,
        start: StartPoint::Flat,
    };
    let solution = dgplan_core::solve(&network, &options)?;
    println!("case: {} ({} buses, {} branches)", network.name, network.buses.len(), network.branches.len());
    println!(
        "converged: {} in {} iterations (max mismatch {:.3e} pu)",
        solution.converged, solution.iterations, solution.max_mismatch
    );
    println!("\n bus     V(pu)    angle(deg)    P(MW)      Q(MVAr)");
    for (i, bus) in network.buses.iter().enumerate() {
        println!(
            "{:4}  {:8.4}  {:10.4}  {:9.3}  {:9.3}",
            bus.id,
            solution.state.v[i],
            solution.state.delta[i].to_degrees(),
            solution.p_injected[i] * network.base_mva,
            solution.q_injected[i] * network.base_mva,
        );
    }
    let vd = voltage_deviation(&network, &solution, 1.0);
    println!(
        "\nlosses: {:.4} MW, {:.4} MVAr;  voltage deviation: {:.4} pu",
        solution.p_loss_total, solution.q_loss_total, vd
    );
    if !solution.converged {
        return Err(anyhow!("load flow did not converge"));
    }
    Ok(())
}

fn cmd_lsf(case: &str, k: Option<usize>) -> anyhow::Result<()> {
    let network = load_network(case)?;
    let solution = dgplan_core::solve(&network, &SolveOptions::default())?;
    if !solution.converged {
        return Err(anyhow!("base load flow did not converge"));
    }
    let ranking = rank(&network, &solution)?;
    println!("bus,raw_lsf,normalized,rank");
    let rank_of = |bus: usize| ranking.order.iter().position(|&b| b == bus).unwrap() + 1;
    for (&(bus, raw), &(_, norm)) in ranking.raw.iter().zip(&ranking.normalized) {
        println!("{bus},{raw:.6},{norm:.6},{}", rank_of(bus));
    }
    if let Some(k) = k {
        let candidates = ranking
            .candidates(k)
            .map_err(|e| ConfigUsageError(e.into()))
            .map_err(|e| e.0)?;
        let list: Vec<String> = candidates.iter().map(|b| b.to_string()).collect();
        println!("# candidates(k={k}): {}", list.join(","));
    }
    Ok(())
}

fn build_optimize_config(args: &OptimizeArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| ConfigUsageError(anyhow!("invalid config file: {e}")))
                .map_err(|e| e.0)?
        }
        None => {
            let case = args.case.clone().ok_or_else(|| {
                anyhow!("a case argument or --config file is required")
            })?;
            let algo = args
                .algo
                .ok_or_else(|| anyhow!("--algo is required without --config"))?;
            let mode = args
                .mode
                .ok_or_else(|| anyhow!("--mode is required without --config"))?;
            ExperimentConfig::new(case, algo.into(), mode.into())
        }
    };
    if let Some(case) = &args.case {
        config.case = case.clone();
    }
    if let Some(algo) = args.algo {
        config.algorithm = algo.into();
    }
    if let Some(mode) = args.mode {
        config.mode = mode.into();
    }
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(k) = args.k {
        config.k = Some(k);
    }
    if let Some(candidates) = &args.candidates {
        config.candidates = Some(candidates.clone());
    }
    if let Some(dg_min) = args.dg_min {
        config.dg_min_mw = dg_min;
    }
    if let Some(dg_max) = args.dg_max {
        config.dg_max_mw = dg_max;
    }
    if let Some(pop) = args.pop {
        config.population = pop;
    }
    if let Some(iters) = args.iters {
        config.iterations = iters;
    }
    if let Some(weight) = args.cost_weight {
        config.cost_weight = weight;
    }
    if let Some(band) = &args.v_band {
        let parts: Vec<&str> = band.split(',').collect();
        let parsed: Option<(f64, f64)> = match parts.as_slice() {
            [lo, hi] => match (lo.trim().parse(), hi.trim().parse()) {
                (Ok(lo), Ok(hi)) => Some((lo, hi)),
                _ => None,
            },
            _ => None,
        };
        config.v_band = Some(parsed.ok_or_else(|| anyhow!("--v-band expects \"lo,hi\""))?);
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.display().to_string());
    }
    Ok(config)
}

fn cmd_optimize(args: &OptimizeArgs) -> anyhow::Result<()> {
    let config = build_optimize_config(args)?;
    let report = run_experiment(&config).map_err(classify_experiment_error)?;
    let network = dgplan_core::experiment::load_case(&config)?;
    let dir = resolve_out_dir(&config);
    write_run_dir(&network, &report, &dir)?;

    println!(
        "case {}: base loss {:.4} MW / {:.4} MVAr",
        report.case_name, report.base.p_loss_mw, report.base.q_loss_mvar
    );
    let candidate_list: Vec<String> = report.candidates.iter().map(|b| b.to_string()).collect();
    println!(
        "candidates [{}]{}",
        candidate_list.join(","),
        if report.candidates_pinned { " (pinned)" } else { "" }
    );
    if let Some(note) = &report.candidate_note {
        eprintln!("note: {note}");
    }
    for scenario in &report.scenarios {
        let best = scenario.best();
        let sizes: Vec<String> = best.sizes_mw.iter().map(|s| format!("{s:.3}")).collect();
        println!(
            "{}: best loss {:.4} MW (fitness {:.4}, seed {}), sizes [{}] MW, \
             improvement {:.2}%",
            scenario.label,
            best.p_loss_mw,
            best.fitness,
            best.seed,
            sizes.join(", "),
            100.0 * (report.base.p_loss_mw - best.p_loss_mw) / report.base.p_loss_mw,
        );
    }
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_report(run_dir: &Path) -> anyhow::Result<()> {
    let (_, report) = load_run_dir(run_dir)?;
    println!("case: {}", report.case_name);
    println!(
        "base: loss {:.4} MW / {:.4} MVAr, vd {:.4} pu, {} iterations",
        report.base.p_loss_mw, report.base.q_loss_mvar, report.base.vd, report.base.iterations
    );
    let candidate_list: Vec<String> = report.candidates.iter().map(|b| b.to_string()).collect();
    println!(
        "candidates: [{}]{}",
        candidate_list.join(","),
        if report.candidates_pinned { " (pinned)" } else { "" }
    );
    if let Some(note) = &report.candidate_note {
        println!("note: {note}");
    }
    println!("\nranking (normalized ascending):");
    for bus in &report.selection_order {
        let row = report.ranking.iter().find(|r| r.bus == *bus).unwrap();
        println!("  bus {:3}  raw {:+.6}  normalized {:.4}", row.bus, row.raw, row.normalized);
    }
    for scenario in &report.scenarios {
        println!("\n{} ({} seeds):", scenario.label, scenario.seeds.len());
        println!(
            "  fitness best/median/worst: {:.4} / {:.4} / {:.4}",
            scenario.aggregate.best_fitness,
            scenario.aggregate.median_fitness,
            scenario.aggregate.worst_fitness
        );
        let best = scenario.best();
        let sizes: Vec<String> = best.sizes_mw.iter().map(|s| format!("{s:.3}")).collect();
        println!(
            "  best: seed {} loss {:.4} MW, q {:.4} MVAr, vd {:.4}, cost {:.3}, sizes [{}] MW",
            best.seed, best.p_loss_mw, best.q_loss_mvar, best.vd, best.dg_cost, sizes.join(", ")
        );
        println!(
            "  improvement vs base: {:.2}%  (total DG {:.3} MW)",
            100.0 * (report.base.p_loss_mw - best.p_loss_mw) / report.base.p_loss_mw,
            best.sizes_mw.iter().sum::<f64>()
        );
    }
    Ok(())
}

fn cmd_verify(run_dir: &Path) -> anyhow::Result<()> {
    let (network, report) = load_run_dir(run_dir)?;
    match verify_report(&network, &report) {
        Ok(()) => {
            let rows: usize = report.scenarios.iter().map(|s| s.seeds.len()).sum();
            println!("verify: PASS ({rows} seed rows re-derived to 1e-9)");
            Ok(())
        }
        Err(e) => Err(anyhow!("verify: FAIL: {e}")),
    }
}

/// Experiment config problems are usage errors (exit 2); the rest are runtime.
fn classify_experiment_error(e: ExperimentError) -> anyhow::Error {
    match e {
        ExperimentError::Config(msg) => anyhow::Error::new(ConfigExit(msg)),
        other => other.into(),
    }
}

#[derive(Debug)]
struct ConfigExit(String);

impl std::fmt::Display for ConfigExit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigExit {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve { case, tol, max_iter } => cmd_solve(case, *tol, *max_iter),
        Command::Lsf { case, k } => cmd_lsf(case, *k),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Report { run_dir } => cmd_report(run_dir),
        Command::Verify { run_dir } => cmd_verify(run_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigExit>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
