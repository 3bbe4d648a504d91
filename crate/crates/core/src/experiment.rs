//! Batch experiment harness: stage 1 solves the base case and ranks candidate
//! buses, stage 2 runs the configured optimizers over a list of seeds, and the
//! results land in a run directory as `report.json`, a canonical `case.json`
//! copy and the CSV tables (losses, DG sizes, voltage profile, convergence,
//! per-branch losses).
//!
//! Reports are reproducible: every loss in a report can be re-derived from the
//! stored sizes plus the case file, which [`verify_report`] checks to 1e-9.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caseio::{self, write_csv, Cell};
use crate::cases;
use crate::error::ExperimentError;
use crate::grid::{BusId, Network};
use crate::objectives::{
    CostParameters, Evaluation, ObjectiveMode, PenaltyWeights, SizingProblem,
};
use crate::powerflow::{solve, SolveOptions};
use crate::pso::{pso_optimize, PsoConfig};
use crate::sensitivity::{rank, SensitivityRanking};
use crate::swarm::Bounds;
use crate::woa::{woa_optimize, WoaConfig};

/// Optimizer selection for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pso,
    Woa,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Pso => write!(f, "pso"),
            Algorithm::Woa => write!(f, "woa"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmChoice {
    Pso,
    Woa,
    Both,
}

impl AlgorithmChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgorithmChoice::Pso => vec![Algorithm::Pso],
            AlgorithmChoice::Woa => vec![Algorithm::Woa],
            AlgorithmChoice::Both => vec![Algorithm::Pso, Algorithm::Woa],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeChoice {
    Technical,
    TechnoEconomic,
    Both,
}

impl ModeChoice {
    pub fn modes(self) -> Vec<ObjectiveMode> {
        match self {
            ModeChoice::Technical => vec![ObjectiveMode::Technical],
            ModeChoice::TechnoEconomic => vec![ObjectiveMode::TechnoEconomic],
            ModeChoice::Both => vec![ObjectiveMode::Technical, ObjectiveMode::TechnoEconomic],
        }
    }
}

/// PSO tuning knobs exposed through the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoTuning {
    pub w_min: f64,
    pub w_max: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_max_fraction: f64,
}

impl Default for PsoTuning {
    fn default() -> Self {
        PsoTuning {
            w_min: 0.4,
            w_max: 0.9,
            c1: 2.0,
            c2: 2.0,
            v_max_fraction: 0.2,
        }
    }
}

/// WOA tuning knobs exposed through the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WoaTuning {
    pub b: f64,
}

impl Default for WoaTuning {
    fn default() -> Self {
        WoaTuning { b: 1.0 }
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn default_dg_min() -> f64 {
    1.0
}

fn default_dg_max() -> f64 {
    50.0
}

fn default_population() -> usize {
    50
}

fn default_iterations() -> usize {
    150
}

fn default_cost_weight() -> f64 {
    1.0
}

/// Everything one experiment needs; mirrors the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Case file path, or a builtin name (`ieee14`, `ieee30`).
    pub case: String,
    pub algorithm: AlgorithmChoice,
    pub mode: ModeChoice,
    /// Candidate count for the sensitivity stage; defaults per case
    /// (4 for ieee14, 3 for ieee30, else min(4, non-slack count)).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Pinned candidate buses, bypassing the ranking stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<BusId>>,
    #[serde(default = "default_dg_min")]
    pub dg_min_mw: f64,
    #[serde(default = "default_dg_max")]
    pub dg_max_mw: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub pso: PsoTuning,
    #[serde(default)]
    pub woa: WoaTuning,
    #[serde(default)]
    pub cost: CostParameters<f64>,
    #[serde(default = "default_cost_weight")]
    pub cost_weight: f64,
    #[serde(default)]
    pub penalties: PenaltyWeights<f64>,
    /// Uniform voltage band override applied to the case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_band: Option<(f64, f64)>,
    /// Output directory; the `DGPLAN_OUT` environment variable overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn new(case: impl Into<String>, algorithm: AlgorithmChoice, mode: ModeChoice) -> Self {
        ExperimentConfig {
            case: case.into(),
            algorithm,
            mode,
            k: None,
            candidates: None,
            dg_min_mw: default_dg_min(),
            dg_max_mw: default_dg_max(),
            seeds: default_seeds(),
            population: default_population(),
            iterations: default_iterations(),
            pso: PsoTuning::default(),
            woa: WoaTuning::default(),
            cost: CostParameters::default(),
            cost_weight: default_cost_weight(),
            penalties: PenaltyWeights::default(),
            v_band: None,
            out_dir: None,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::Config("seeds list is empty".into()));
        }
        if !(self.dg_min_mw < self.dg_max_mw) {
            return Err(ExperimentError::Config(format!(
                "dg bounds [{}, {}] are not increasing",
                self.dg_min_mw, self.dg_max_mw
            )));
        }
        if self.population < 2 {
            return Err(ExperimentError::Config(
                "population must be at least 2".into(),
            ));
        }
        if let Some((lo, hi)) = self.v_band {
            if !(lo < hi) {
                return Err(ExperimentError::Config(format!(
                    "v_band ({lo}, {hi}) is not increasing"
                )));
            }
        }
        Ok(())
    }
}

/// Loads the network named by a config: builtin name or file path, with the
/// config's voltage-band override applied.
pub fn load_case(config: &ExperimentConfig) -> Result<Network<f64>, ExperimentError> {
    let mut network = match cases::builtin(&config.case) {
        Some(text) => caseio::parse_case_text(text)?,
        None => caseio::read_case_file(Path::new(&config.case))?,
    };
    if let Some(band) = config.v_band {
        network.v_band = Some(band);
    }
    let report = crate::grid::validate_network(&network);
    if !report.is_empty() {
        return Err(crate::error::ModelError::InvalidNetwork(report.to_string()).into());
    }
    Ok(network)
}

/// Base-case summary of stage 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseSummary {
    /// Exact real loss, MW.
    pub p_loss_mw: f64,
    /// Series reactive loss, MVAr.
    pub q_loss_mvar: f64,
    pub vd: f64,
    pub iterations: usize,
    /// (bus id, |V| pu, angle degrees), bus-table order.
    pub voltages: Vec<(BusId, f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingRow {
    pub bus: BusId,
    pub raw: f64,
    pub normalized: f64,
}

/// One seed's outcome inside a scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    /// Best sizes found, MW, candidate order.
    pub sizes_mw: Vec<f64>,
    pub fitness: f64,
    pub p_loss_mw: f64,
    pub q_loss_mvar: f64,
    pub vd: f64,
    pub dg_cost: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Best-so-far fitness after each iteration.
    pub convergence: Vec<f64>,
    /// Wall time of the optimizer run, seconds. Not serialized: reports stay
    /// byte-reproducible.
    #[serde(skip)]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub best_fitness: f64,
    pub median_fitness: f64,
    pub worst_fitness: f64,
    pub best_p_loss_mw: f64,
}

/// One (algorithm, mode) block of the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub algorithm: Algorithm,
    pub mode: ObjectiveMode,
    /// Stable label used in file columns, e.g. `pso_technical`.
    pub label: String,
    pub seeds: Vec<SeedReport>,
    /// Index into `seeds` of the lowest-fitness run.
    pub best_seed: usize,
    pub aggregate: Aggregate,
}

impl ScenarioReport {
    pub fn best(&self) -> &SeedReport {
        &self.seeds[self.best_seed]
    }
}

/// Complete, reproducible record of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub case_name: String,
    pub base: BaseSummary,
    pub ranking: Vec<RankingRow>,
    /// Ranking order (normalized value ascending), all non-slack buses.
    pub selection_order: Vec<BusId>,
    /// Candidate buses the optimizers actually used.
    pub candidates: Vec<BusId>,
    pub candidates_pinned: bool,
    /// Set when the computed candidate set differs from the published one for
    /// a bundled case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_note: Option<String>,
    pub scenarios: Vec<ScenarioReport>,
}

fn scenario_label(algorithm: Algorithm, mode: ObjectiveMode) -> String {
    let mode = match mode {
        ObjectiveMode::Technical => "technical",
        ObjectiveMode::TechnoEconomic => "techno_economic",
    };
    format!("{algorithm}_{mode}")
}

fn default_k(case_name: &str, non_slack: usize) -> usize {
    match cases::published_candidates(case_name) {
        Some(set) => set.len().min(non_slack),
        None => non_slack.min(4),
    }
}

fn build_problem(
    network: &Network<f64>,
    config: &ExperimentConfig,
    candidates: &[BusId],
    mode: ObjectiveMode,
) -> Result<SizingProblem<f64>, ExperimentError> {
    let mut problem = SizingProblem::new(
        network.clone(),
        candidates.to_vec(),
        config.dg_min_mw,
        config.dg_max_mw,
        mode,
    )?;
    problem.cost = config.cost;
    problem.cost_term.weight = config.cost_weight;
    problem.penalties = config.penalties;
    Ok(problem)
}

fn fitness_closure<'p>(problem: &'p SizingProblem<f64>) -> impl FnMut(&[f64]) -> f64 + 'p {
    move |sizes: &[f64]| match problem.evaluate(sizes) {
        Ok(eval) => eval.fitness,
        Err(_) => problem.penalties.non_convergence,
    }
}

fn run_scenario(
    network: &Network<f64>,
    config: &ExperimentConfig,
    candidates: &[BusId],
    algorithm: Algorithm,
    mode: ObjectiveMode,
) -> Result<ScenarioReport, ExperimentError> {
    let problem = build_problem(network, config, candidates, mode)?;
    let bounds = Bounds::new(config.dg_min_mw, config.dg_max_mw, candidates.len());

    let seeds: Vec<SeedReport> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut fitness = fitness_closure(&problem);
            let result = match algorithm {
                Algorithm::Pso => {
                    let pso_config = PsoConfig {
                        population: config.population,
                        max_iterations: config.iterations,
                        w_min: config.pso.w_min,
                        w_max: config.pso.w_max,
                        c1: config.pso.c1,
                        c2: config.pso.c2,
                        v_max_fraction: config.pso.v_max_fraction,
                        seed,
                    };
                    pso_optimize(bounds, &pso_config, &mut fitness)
                }
                Algorithm::Woa => {
                    let woa_config = WoaConfig {
                        population: config.population,
                        max_iterations: config.iterations,
                        b: config.woa.b,
                        seed,
                    };
                    woa_optimize(bounds, &woa_config, &mut fitness)
                }
            };
            // evaluate is deterministic, so re-deriving the best evaluation
            // reproduces exactly what the optimizer saw
            let eval = problem
                .evaluate(&result.best_position)
                .expect("best position has the problem dimension");
            debug_assert_eq!(eval.fitness.to_bits(), result.best_fitness.to_bits());
            SeedReport {
                seed,
                sizes_mw: result.best_position,
                fitness: eval.fitness,
                p_loss_mw: eval.p_loss_mw,
                q_loss_mvar: eval.q_loss_mvar,
                vd: eval.vd,
                dg_cost: eval.dg_cost,
                converged: eval.converged,
                evaluations: result.evaluations,
                convergence: result.convergence,
                wall_time_s: Some(result.wall_time.as_secs_f64()),
            }
        })
        .collect();

    let best_seed = seeds
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.fitness.partial_cmp(&b.1.fitness).unwrap())
        .map(|(i, _)| i)
        .expect("seeds list is non-empty");
    let mut fitnesses: Vec<f64> = seeds.iter().map(|s| s.fitness).collect();
    fitnesses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = fitnesses[fitnesses.len() / 2];
    let aggregate = Aggregate {
        best_fitness: fitnesses[0],
        median_fitness: median,
        worst_fitness: *fitnesses.last().unwrap(),
        best_p_loss_mw: seeds[best_seed].p_loss_mw,
    };

    Ok(ScenarioReport {
        algorithm,
        mode,
        label: scenario_label(algorithm, mode),
        seeds,
        best_seed,
        aggregate,
    })
}

/// Stage 1 + stage 2: base solve, ranking, optimizer runs. Pure computation;
/// see [`write_run_dir`] for the file outputs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    config.validate()?;
    let network = load_case(config)?;

    // stage 1: base case and candidate ranking
    let base_solution = solve(&network, &SolveOptions::default())?;
    if !base_solution.converged {
        return Err(ExperimentError::Config(format!(
            "base case did not converge within {} iterations",
            SolveOptions::<f64>::default().max_iterations
        )));
    }
    let ranking: SensitivityRanking<f64> = rank(&network, &base_solution)?;
    let non_slack = ranking.raw.len();
    let k = config.k.unwrap_or_else(|| default_k(&network.name, non_slack));

    let computed = ranking.candidates(k)?;
    let (candidates, pinned) = match &config.candidates {
        Some(pin) => {
            if pin.is_empty() {
                return Err(ExperimentError::Config("pinned candidate list is empty".into()));
            }
            for &bus in pin {
                if network.index_of(bus).is_none() {
                    return Err(ExperimentError::Config(format!(
                        "pinned candidate bus {bus} does not exist"
                    )));
                }
            }
            (pin.clone(), true)
        }
        None => (computed.clone(), false),
    };

    let candidate_note = cases::published_candidates(&network.name).and_then(|published| {
        let mut a = computed.clone();
        let mut b = published.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        (a != b).then(|| {
            format!(
                "computed candidate set {computed:?} differs from the published set \
                 {published:?} for {}; pass --candidates to pin the published buses",
                network.name
            )
        })
    });

    let sizing_base = build_problem(
        &network,
        config,
        &candidates,
        ObjectiveMode::Technical,
    )?;
    let base = BaseSummary {
        p_loss_mw: sizing_base.base_loss_mw(),
        q_loss_mvar: base_solution.q_loss_total,
        vd: crate::objectives::voltage_deviation(&network, &base_solution, 1.0),
        iterations: base_solution.iterations,
        voltages: network
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| {
                (
                    b.id,
                    base_solution.state.v[i],
                    base_solution.state.delta[i].to_degrees(),
                )
            })
            .collect(),
    };

    let mut scenarios = Vec::new();
    for algorithm in config.algorithm.algorithms() {
        for mode in config.mode.modes() {
            scenarios.push(run_scenario(&network, config, &candidates, algorithm, mode)?);
        }
    }

    Ok(RunReport {
        config: config.clone(),
        case_name: network.name.clone(),
        base,
        ranking: ranking
            .raw
            .iter()
            .zip(&ranking.normalized)
            .map(|(&(bus, raw), &(_, normalized))| RankingRow {
                bus,
                raw,
                normalized,
            })
            .collect(),
        selection_order: ranking.order.clone(),
        candidates,
        candidates_pinned: pinned,
        candidate_note,
        scenarios,
    })
}

/// Re-derives the best evaluation of a scenario from its stored sizes.
fn rederive_best(
    network: &Network<f64>,
    report: &RunReport,
    scenario: &ScenarioReport,
) -> Result<Evaluation<f64>, ExperimentError> {
    let problem = build_problem(network, &report.config, &report.candidates, scenario.mode)?;
    Ok(problem.evaluate(&scenario.best().sizes_mw)?)
}

/// Builds the CSV file set for a report: (file name, content) pairs.
///
/// Files: `losses.csv` (per-scenario summary against the base case),
/// `dg_sizes.csv` (per-candidate-bus best sizes), `voltage_profile.csv`
/// (per-bus magnitudes), `convergence.csv` (per-iteration best fitness per
/// scenario and seed) and `branch_losses.csv` (per-branch real loss before and
/// after DG integration).
pub fn emit_plot_data(
    network: &Network<f64>,
    report: &RunReport,
) -> Result<Vec<(String, String)>, ExperimentError> {
    let mut files = Vec::new();

    // losses.csv
    {
        let header = [
            "scenario",
            "p_loss_mw",
            "q_loss_mvar",
            "vd_pu",
            "dg_cost",
            "fitness",
            "improvement_pct",
        ];
        let mut rows = vec![vec![
            Cell::Text("base".into()),
            Cell::Num(report.base.p_loss_mw),
            Cell::Num(report.base.q_loss_mvar),
            Cell::Num(report.base.vd),
            Cell::Num(0.0),
            Cell::Empty,
            Cell::Num(0.0),
        ]];
        for s in &report.scenarios {
            let best = s.best();
            let improvement = 100.0 * (report.base.p_loss_mw - best.p_loss_mw)
                / report.base.p_loss_mw;
            rows.push(vec![
                Cell::Text(s.label.clone()),
                Cell::Num(best.p_loss_mw),
                Cell::Num(best.q_loss_mvar),
                Cell::Num(best.vd),
                Cell::Num(best.dg_cost),
                Cell::Num(best.fitness),
                Cell::Num(improvement),
            ]);
        }
        files.push(("losses.csv".to_string(), write_csv(&header, &rows)));
    }

    // dg_sizes.csv
    {
        let mut header: Vec<String> = vec!["bus".into()];
        header.extend(report.scenarios.iter().map(|s| s.label.clone()));
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<Cell>> = report
            .candidates
            .iter()
            .enumerate()
            .map(|(i, &bus)| {
                let mut row = vec![Cell::Int(bus as i64)];
                row.extend(
                    report
                        .scenarios
                        .iter()
                        .map(|s| Cell::Num(s.best().sizes_mw[i])),
                );
                row
            })
            .collect();
        files.push(("dg_sizes.csv".to_string(), write_csv(&header_refs, &rows)));
    }

    // voltage_profile.csv and branch_losses.csv need the solved states
    let best_solutions: Vec<Evaluation<f64>> = report
        .scenarios
        .iter()
        .map(|s| rederive_best(network, report, s))
        .collect::<Result<_, _>>()?;

    {
        let mut header: Vec<String> = vec!["bus".into(), "base".into()];
        header.extend(report.scenarios.iter().map(|s| s.label.clone()));
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<Cell>> = network
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut row = vec![
                    Cell::Int(b.id as i64),
                    Cell::Num(report.base.voltages[i].1),
                ];
                row.extend(
                    best_solutions
                        .iter()
                        .map(|e| Cell::Num(e.solution.state.v[i])),
                );
                row
            })
            .collect();
        files.push((
            "voltage_profile.csv".to_string(),
            write_csv(&header_refs, &rows),
        ));
    }

    {
        let base_flows = crate::powerflow::branch_flows(
            network,
            &{
                // reconstruct the stage-1 state from the stored voltages
                let mut state = crate::powerflow::PowerFlowState::flat(network);
                for (i, &(_, v, deg)) in report.base.voltages.iter().enumerate() {
                    state.v[i] = v;
                    state.delta[i] = deg.to_radians();
                }
                state
            },
        );
        let mut header: Vec<String> = vec!["from".into(), "to".into(), "base".into()];
        header.extend(report.scenarios.iter().map(|s| s.label.clone()));
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<Cell>> = network
            .branches
            .iter()
            .enumerate()
            .map(|(bi, br)| {
                let mut row = vec![
                    Cell::Int(br.from as i64),
                    Cell::Int(br.to as i64),
                    Cell::Num(base_flows[bi].p_loss_mw),
                ];
                row.extend(
                    best_solutions
                        .iter()
                        .map(|e| Cell::Num(e.solution.branch_flows[bi].p_loss_mw)),
                );
                row
            })
            .collect();
        files.push((
            "branch_losses.csv".to_string(),
            write_csv(&header_refs, &rows),
        ));
    }

    // convergence.csv
    {
        let mut header: Vec<String> = vec!["iteration".into()];
        for s in &report.scenarios {
            for seed in &s.seeds {
                header.push(format!("{}_seed{}", s.label, seed.seed));
            }
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let iterations = report.config.iterations;
        let mut rows = Vec::with_capacity(iterations);
        for it in 0..iterations {
            let mut row = vec![Cell::Int((it + 1) as i64)];
            for s in &report.scenarios {
                for seed in &s.seeds {
                    row.push(match seed.convergence.get(it) {
                        Some(&v) => Cell::Num(v),
                        None => Cell::Empty,
                    });
                }
            }
            rows.push(row);
        }
        files.push((
            "convergence.csv".to_string(),
            write_csv(&header_refs, &rows),
        ));
    }

    Ok(files)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `report.json`, the canonical `case.json` copy and all CSV tables
/// into a run directory (created if missing).
pub fn write_run_dir(
    network: &Network<f64>,
    report: &RunReport,
    dir: &Path,
) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut report_json =
        serde_json::to_string_pretty(report).expect("report serializes");
    report_json.push('\n');
    write_file(dir, "report.json", &report_json)?;
    write_file(dir, "case.json", &caseio::write_case_json(network))?;
    for (name, content) in emit_plot_data(network, report)? {
        write_file(dir, &name, &content)?;
    }
    Ok(())
}

/// Resolves the output directory: `DGPLAN_OUT` env var wins, then the config,
/// then a name derived from the case.
pub fn resolve_out_dir(config: &ExperimentConfig) -> PathBuf {
    if let Ok(env_dir) = std::env::var("DGPLAN_OUT") {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    match &config.out_dir {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(format!("runs/{}", config.case.replace(['/', '\\'], "_"))),
    }
}

/// Runs the experiment and writes the run directory; returns the report and
/// the directory used.
pub fn run_and_write(
    config: &ExperimentConfig,
) -> Result<(RunReport, PathBuf), ExperimentError> {
    let report = run_experiment(config)?;
    let network = load_case(config)?;
    let dir = resolve_out_dir(config);
    write_run_dir(&network, &report, &dir)?;
    Ok((report, dir))
}

/// Loads a run directory written by [`write_run_dir`].
pub fn load_run_dir(dir: &Path) -> Result<(Network<f64>, RunReport), ExperimentError> {
    let report_path = dir.join("report.json");
    let report_text =
        std::fs::read_to_string(&report_path).map_err(|source| ExperimentError::Io {
            path: report_path.display().to_string(),
            source,
        })?;
    let report: RunReport =
        serde_json::from_str(&report_text).map_err(crate::error::CaseError::Json)?;
    let case_path = dir.join("case.json");
    let case_text = std::fs::read_to_string(&case_path).map_err(|source| ExperimentError::Io {
        path: case_path.display().to_string(),
        source,
    })?;
    let network = caseio::read_case_json(&case_text)?;
    Ok((network, report))
}

/// Re-solves the load flow at every reported sizing and checks that the
/// reported losses and fitness are reproducible to 1e-9. An empty report
/// passes vacuously.
pub fn verify_report(
    network: &Network<f64>,
    report: &RunReport,
) -> Result<(), ExperimentError> {
    const TOL: f64 = 1e-9;
    for scenario in &report.scenarios {
        let problem = build_problem(network, &report.config, &report.candidates, scenario.mode)?;
        for seed in &scenario.seeds {
            let eval = problem.evaluate(&seed.sizes_mw)?;
            let checks = [
                ("p_loss_mw", eval.p_loss_mw, seed.p_loss_mw),
                ("fitness", eval.fitness, seed.fitness),
                ("q_loss_mvar", eval.q_loss_mvar, seed.q_loss_mvar),
                ("vd", eval.vd, seed.vd),
                ("dg_cost", eval.dg_cost, seed.dg_cost),
            ];
            for (field, derived, reported) in checks {
                if (derived - reported).abs() > TOL {
                    return Err(ExperimentError::VerifyFailed(format!(
                        "{} seed {}: {field} reported {reported} but re-derived {derived}",
                        scenario.label, seed.seed
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::new("ieee14", AlgorithmChoice::Pso, ModeChoice::Technical);
        config.seeds = vec![1];
        config.population = 8;
        config.iterations = 5;
        config.candidates = Some(vec![2, 8, 9, 10]);
        config
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = small_config();
        let text = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn config_defaults_fill_missing_fields() {
        let text = r#"{"case":"ieee14","algorithm":"both","mode":"both"}"#;
        let config: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(config.seeds, (1..=10).collect::<Vec<_>>());
        assert_eq!(config.population, 50);
        assert_eq!(config.iterations, 150);
        assert_eq!(config.dg_min_mw, 1.0);
        assert_eq!(config.dg_max_mw, 50.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut config = small_config();
        config.seeds.clear();
        assert!(matches!(
            run_experiment(&config),
            Err(ExperimentError::Config(_))
        ));
        let mut config = small_config();
        config.dg_min_mw = 60.0;
        assert!(run_experiment(&config).is_err());
    }

    #[test]
    fn experiment_produces_structurally_complete_report() {
        let report = run_experiment(&small_config()).unwrap();
        assert_eq!(report.case_name, "ieee14");
        assert_eq!(report.scenarios.len(), 1);
        assert_eq!(report.candidates, vec![2, 8, 9, 10]);
        assert!(report.candidates_pinned);
        assert_eq!(report.ranking.len(), 13);
        let scenario = &report.scenarios[0];
        assert_eq!(scenario.seeds.len(), 1);
        assert_eq!(scenario.seeds[0].convergence.len(), 5);
        assert_eq!(scenario.seeds[0].sizes_mw.len(), 4);
        // every seed improves on (or at worst matches) the base loss
        assert!(scenario.best().p_loss_mw < report.base.p_loss_mw);
    }

    #[test]
    fn computed_candidates_note_discrepancy_against_published() {
        let mut config = small_config();
        config.candidates = None;
        config.k = Some(4);
        let report = run_experiment(&config).unwrap();
        assert!(!report.candidates_pinned);
        // standard data ranks different buses than the published set, which
        // the report must call out rather than hide
        assert!(report.candidate_note.is_some());
    }

    #[test]
    fn emitted_files_have_contracted_shapes() {
        let config = small_config();
        let report = run_experiment(&config).unwrap();
        let network = load_case(&config).unwrap();
        let files = emit_plot_data(&network, &report).unwrap();
        let by_name: std::collections::HashMap<_, _> = files.into_iter().collect();

        let dg = &by_name["dg_sizes.csv"];
        assert_eq!(dg.lines().count(), 1 + 4, "{dg}");
        let vp = &by_name["voltage_profile.csv"];
        assert_eq!(vp.lines().count(), 1 + 14);
        let conv = &by_name["convergence.csv"];
        assert_eq!(conv.lines().count(), 1 + 5);
        let losses = &by_name["losses.csv"];
        assert_eq!(losses.lines().count(), 1 + 1 + 1); // header, base, one scenario
        let bl = &by_name["branch_losses.csv"];
        assert_eq!(bl.lines().count(), 1 + 20);
        // branch ordering identical between base and scenario columns: same
        // row set, columns only appended
        assert!(bl.starts_with("from,to,base,pso_technical\n"));
    }

    #[test]
    fn run_dir_round_trips_and_verifies() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = small_config();
        config.out_dir = Some(tmp.path().join("run").display().to_string());
        let (report, dir) = run_and_write(&config).unwrap();
        let (network, loaded) = load_run_dir(&dir).unwrap();
        assert_eq!(loaded.case_name, report.case_name);
        verify_report(&network, &loaded).unwrap();
    }

    #[test]
    fn tampered_report_fails_verification_naming_the_row() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = small_config();
        config.out_dir = Some(tmp.path().join("run").display().to_string());
        let (_report, dir) = run_and_write(&config).unwrap();
        let (network, mut loaded) = load_run_dir(&dir).unwrap();
        loaded.scenarios[0].seeds[0].p_loss_mw += 0.5;
        let err = verify_report(&network, &loaded).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pso_technical"), "{msg}");
        assert!(msg.contains("seed 1"), "{msg}");
    }

    #[test]
    fn empty_report_passes_vacuously() {
        let config = small_config();
        let report = run_experiment(&config).unwrap();
        let network = load_case(&config).unwrap();
        let mut empty = report.clone();
        empty.scenarios.clear();
        verify_report(&network, &empty).unwrap();
    }

    #[test]
    fn identical_config_gives_byte_identical_outputs() {
        let config = small_config();
        let report_a = run_experiment(&config).unwrap();
        let report_b = run_experiment(&config).unwrap();
        let network = load_case(&config).unwrap();
        let files_a = emit_plot_data(&network, &report_a).unwrap();
        let files_b = emit_plot_data(&network, &report_b).unwrap();
        assert_eq!(files_a, files_b);
        let json_a = serde_json::to_string(&report_a).unwrap();
        let json_b = serde_json::to_string(&report_b).unwrap();
        assert_eq!(json_a, json_b);
    }

    #[test]
    fn env_var_overrides_out_dir() {
        let config = small_config();
        std::env::set_var("DGPLAN_OUT", "/tmp/dgplan-env-test");
        let dir = resolve_out_dir(&config);
        std::env::remove_var("DGPLAN_OUT");
        assert_eq!(dir, PathBuf::from("/tmp/dgplan-env-test"));
    }
}
