//! Objective functions for DG sizing: exact real loss, voltage deviation, DG
//! cost, and the penalized fitness used by the optimizers.
//!
//! The exact loss is the classical quadratic form over bus injections,
//!
//! ```text
//! P_L = sum_ij  alpha_ij (P_i P_j + Q_i Q_j) + beta_ij (Q_i P_j - P_i Q_j)
//! alpha_ij = R_ij cos(d_i - d_j) / (V_i V_j)
//! beta_ij  = R_ij sin(d_i - d_j) / (V_i V_j)
//! ```
//!
//! with `R_ij` the real part of the bus impedance matrix (inverse of Ybus).
//! At any converged state it agrees with the branch series-loss summation to
//! machine precision, which the test suite checks on every solution it sees.

use crate::error::ObjectiveError;
use crate::grid::{
    apply_dg_injections, build_admittance_matrix, AdmittanceMatrix, BusId, BusKind, DgPlacement,
    Network,
};
use crate::linalg::complex_inverse;
use crate::powerflow::{solve_prepared, PowerFlowSolution, SolveOptions, StartPoint};
use crate::scalar::{lit, Real};

/// The alpha/beta coefficient matrices of the exact loss formula, evaluated
/// from a solution's voltages and the network's bus resistance matrix.
#[derive(Debug, Clone)]
pub struct LossCoefficients<T> {
    n: usize,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
}

/// Real part of the bus impedance matrix Zbus = Ybus^-1, row-major.
pub fn bus_resistance_matrix<T: Real>(
    ybus: &AdmittanceMatrix<T>,
) -> Result<Vec<T>, ObjectiveError> {
    let n = ybus.order();
    let z = complex_inverse(ybus.entries(), n)?;
    Ok(z.iter().map(|c| c.re).collect())
}

impl<T: Real> LossCoefficients<T> {
    /// Evaluates alpha/beta at a solution, building Zbus from the network.
    pub fn from_solution(
        network: &Network<T>,
        solution: &PowerFlowSolution<T>,
    ) -> Result<Self, ObjectiveError> {
        let ybus = build_admittance_matrix(network)?;
        let r = bus_resistance_matrix(&ybus)?;
        Ok(Self::with_resistance(&r, solution))
    }

    /// Evaluates alpha/beta given a precomputed bus resistance matrix.
    pub fn with_resistance(r_bus: &[T], solution: &PowerFlowSolution<T>) -> Self {
        let v = &solution.state.v;
        let d = &solution.state.delta;
        let n = v.len();
        debug_assert_eq!(r_bus.len(), n * n);
        let mut alpha = vec![T::zero(); n * n];
        let mut beta = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let dij = d[i] - d[j];
                let scale = r_bus[i * n + j] / (v[i] * v[j]);
                alpha[i * n + j] = scale * dij.cos();
                beta[i * n + j] = scale * dij.sin();
            }
        }
        LossCoefficients { n, alpha, beta }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// The loss quadratic form over per-unit injections; returns per-unit MW.
    pub fn loss(&self, p: &[T], q: &[T]) -> T {
        let n = self.n;
        debug_assert_eq!(p.len(), n);
        debug_assert_eq!(q.len(), n);
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                let a = self.alpha[i * n + j];
                let b = self.beta[i * n + j];
                acc += a * (p[i] * p[j] + q[i] * q[j]) + b * (q[i] * p[j] - p[i] * q[j]);
            }
        }
        acc
    }
}

/// Exact total real loss (per-unit) from the quadratic form over the
/// solution's calculated injections.
pub fn exact_loss<T: Real>(
    network: &Network<T>,
    solution: &PowerFlowSolution<T>,
) -> Result<T, ObjectiveError> {
    let coeffs = LossCoefficients::from_solution(network, solution)?;
    Ok(coeffs.loss(&solution.p_injected, &solution.q_injected))
}

/// Sum over PQ buses of |V_i - v_ref|, per-unit.
pub fn voltage_deviation<T: Real>(
    network: &Network<T>,
    solution: &PowerFlowSolution<T>,
    v_ref: T,
) -> T {
    network
        .buses
        .iter()
        .enumerate()
        .filter(|(_, b)| b.kind == BusKind::Pq)
        .map(|(i, _)| (solution.state.v[i] - v_ref).abs())
        .sum()
}

/// Cost coefficients of the DG investment/energy term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostParameters<T> {
    /// DG capital/energy cost coefficient, currency per MW.
    pub c_dg: T,
    /// Electricity tariff factor.
    pub tariff: T,
    /// Grid-connection factor, dimensionless.
    pub k_conn: T,
}

impl<T: Real> Default for CostParameters<T> {
    fn default() -> Self {
        CostParameters {
            c_dg: T::one(),
            tariff: T::one(),
            k_conn: T::one(),
        }
    }
}

/// Linear aggregate DG cost: k_conn * tariff * c_dg * total MW.
pub fn dg_cost<T: Real>(placement: &DgPlacement<T>, cost: &CostParameters<T>) -> T {
    cost.k_conn * cost.tariff * cost.c_dg * placement.total_mw()
}

/// Which objective the optimizer minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// Real power loss only.
    Technical,
    /// Real power loss plus the normalized DG-cost term.
    TechnoEconomic,
}

impl std::fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObjectiveMode::Technical => write!(f, "technical"),
            ObjectiveMode::TechnoEconomic => write!(f, "techno-economic"),
        }
    }
}

/// Per-constraint penalty multipliers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PenaltyWeights<T> {
    /// Weight per squared per-unit voltage-band violation.
    pub voltage: T,
    /// Weight per squared per-unit branch-rating violation.
    pub rating: T,
    /// Flat penalty when the load flow fails to converge.
    pub non_convergence: T,
}

impl<T: Real> Default for PenaltyWeights<T> {
    fn default() -> Self {
        PenaltyWeights {
            voltage: lit(1e4),
            rating: lit(1e4),
            non_convergence: lit(1e7),
        }
    }
}

/// Weight of the normalized cost term in techno-economic mode.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostTerm<T> {
    pub weight: T,
}

impl<T: Real> Default for CostTerm<T> {
    fn default() -> Self {
        CostTerm { weight: T::one() }
    }
}

/// The sizing problem the optimizers run against: base network, candidate
/// buses, MW bounds, objective mode and penalty configuration.
///
/// Construction runs the base-case load flow once and caches the admittance
/// and bus-resistance matrices; evaluations reuse them (DG injections do not
/// change the network topology).
#[derive(Debug, Clone)]
pub struct SizingProblem<T> {
    network: Network<T>,
    pub candidates: Vec<BusId>,
    pub dg_min_mw: T,
    pub dg_max_mw: T,
    pub mode: ObjectiveMode,
    pub cost: CostParameters<T>,
    pub cost_term: CostTerm<T>,
    pub penalties: PenaltyWeights<T>,
    pub solve_options: SolveOptions<T>,
    ybus: AdmittanceMatrix<T>,
    r_bus: Vec<T>,
    base: PowerFlowSolution<T>,
    base_loss_mw: T,
}

/// Per-constraint penalty magnitudes of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Penalties<T> {
    pub voltage: T,
    pub rating: T,
    pub non_convergence: T,
}

impl<T: Real> Penalties<T> {
    pub fn total(&self) -> T {
        self.voltage + self.rating + self.non_convergence
    }

    fn zero() -> Self {
        Penalties {
            voltage: T::zero(),
            rating: T::zero(),
            non_convergence: T::zero(),
        }
    }
}

/// Everything the optimizer and the reports need to know about one candidate
/// sizing vector.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    /// Minimized scalar: objective plus total penalties.
    pub fitness: T,
    /// Exact real loss, MW.
    pub p_loss_mw: T,
    /// Series reactive loss, MVAr.
    pub q_loss_mvar: T,
    /// Voltage deviation about 1.0 pu over PQ buses.
    pub vd: T,
    /// DG cost at the configured cost parameters.
    pub dg_cost: T,
    pub penalties: Penalties<T>,
    pub converged: bool,
    pub solution: PowerFlowSolution<T>,
}

impl<T: Real> SizingProblem<T> {
    pub fn new(
        network: Network<T>,
        candidates: Vec<BusId>,
        dg_min_mw: T,
        dg_max_mw: T,
        mode: ObjectiveMode,
    ) -> Result<Self, ObjectiveError> {
        if candidates.is_empty() {
            return Err(ObjectiveError::NoCandidates);
        }
        if !(dg_min_mw < dg_max_mw) {
            return Err(ObjectiveError::InvalidBounds {
                min: dg_min_mw.to_f64().unwrap_or(f64::NAN),
                max: dg_max_mw.to_f64().unwrap_or(f64::NAN),
            });
        }
        for &c in &candidates {
            if network.index_of(c).is_none() {
                return Err(crate::error::ModelError::UnknownBus(c).into());
            }
        }
        let solve_options = SolveOptions::default();
        let ybus = build_admittance_matrix(&network)?;
        let base = solve_prepared(&network, &ybus, &solve_options)?;
        if !base.converged {
            return Err(ObjectiveError::UnconvergedBase);
        }
        let r_bus = bus_resistance_matrix(&ybus)?;
        let coeffs = LossCoefficients::with_resistance(&r_bus, &base);
        let base_loss_mw = coeffs.loss(&base.p_injected, &base.q_injected) * network.base_mva;
        Ok(SizingProblem {
            network,
            candidates,
            dg_min_mw,
            dg_max_mw,
            mode,
            cost: CostParameters::default(),
            cost_term: CostTerm::default(),
            penalties: PenaltyWeights::default(),
            solve_options,
            ybus,
            r_bus,
            base,
            base_loss_mw,
        })
    }

    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn base_solution(&self) -> &PowerFlowSolution<T> {
        &self.base
    }

    /// Base-case exact loss, MW.
    pub fn base_loss_mw(&self) -> T {
        self.base_loss_mw
    }

    pub fn dimension(&self) -> usize {
        self.candidates.len()
    }

    /// The placement encoded by a sizes vector, in candidate order.
    pub fn placement(&self, sizes_mw: &[T]) -> DgPlacement<T> {
        DgPlacement::from_pairs(
            self.candidates
                .iter()
                .copied()
                .zip(sizes_mw.iter().copied()),
        )
    }

    /// DG cost at the all-max sizing, the normalization constant of the
    /// techno-economic cost term.
    pub fn dg_cost_max(&self) -> T {
        let n = lit::<T>(self.candidates.len() as f64);
        self.cost.k_conn * self.cost.tariff * self.cost.c_dg * n * self.dg_max_mw
    }

    /// Penalized fitness evaluation of a sizes vector (MW, candidate order).
    ///
    /// Load-flow failure is not an error: it yields a penalty-dominated
    /// fitness so the optimizers can continue.
    pub fn evaluate(&self, sizes_mw: &[T]) -> Result<Evaluation<T>, ObjectiveError> {
        if sizes_mw.len() != self.candidates.len() {
            return Err(ObjectiveError::DimensionMismatch {
                got: sizes_mw.len(),
                expected: self.candidates.len(),
            });
        }
        let placement = self.placement(sizes_mw);
        let candidate = apply_dg_injections(&self.network, &placement)?;
        let options = SolveOptions {
            tolerance: self.solve_options.tolerance,
            max_iterations: self.solve_options.max_iterations,
            start: StartPoint::From(self.base.state.clone()),
        };
        let solution = solve_prepared(&candidate, &self.ybus, &options)?;
        let cost = dg_cost(&placement, &self.cost);

        if !solution.converged {
            let penalties = Penalties {
                voltage: T::zero(),
                rating: T::zero(),
                non_convergence: self.penalties.non_convergence,
            };
            return Ok(Evaluation {
                fitness: penalties.total(),
                p_loss_mw: T::infinity(),
                q_loss_mvar: T::infinity(),
                vd: T::infinity(),
                dg_cost: cost,
                penalties,
                converged: false,
                solution,
            });
        }

        let coeffs = LossCoefficients::with_resistance(&self.r_bus, &solution);
        let p_loss_mw =
            coeffs.loss(&solution.p_injected, &solution.q_injected) * self.network.base_mva;
        let vd = voltage_deviation(&candidate, &solution, T::one());

        let mut penalties = Penalties::zero();
        for (i, _) in candidate.buses.iter().enumerate() {
            let (lo, hi) = candidate.voltage_limits(i);
            let v = solution.state.v[i];
            let over = (v - hi).max(T::zero());
            let under = (lo - v).max(T::zero());
            penalties.voltage += self.penalties.voltage * (over * over + under * under);
        }
        for (br, flow) in candidate.branches.iter().zip(&solution.branch_flows) {
            if let Some(rating) = br.rating {
                let excess = (flow.current - rating).max(T::zero());
                penalties.rating += self.penalties.rating * excess * excess;
            }
        }

        // power balance holds by construction at a converged solution:
        // net injections account exactly for series plus shunt losses
        #[cfg(debug_assertions)]
        {
            let total_inj: T = solution.p_injected.iter().copied().sum();
            let shunt_loss: T = candidate
                .buses
                .iter()
                .enumerate()
                .map(|(i, b)| b.shunt_g * solution.state.v[i] * solution.state.v[i])
                .sum();
            let branch_pu = solution.p_loss_total / candidate.base_mva;
            debug_assert!(
                (total_inj - branch_pu - shunt_loss).abs() <= lit::<T>(1e-9),
                "power balance residual {:?}",
                total_inj - branch_pu - shunt_loss
            );
        }

        let objective = match self.mode {
            ObjectiveMode::Technical => p_loss_mw,
            ObjectiveMode::TechnoEconomic => {
                let cost_max = self.dg_cost_max();
                let normalized = if cost_max > T::zero() {
                    cost / cost_max
                } else {
                    T::zero()
                };
                p_loss_mw + self.cost_term.weight * normalized * self.base_loss_mw
            }
        };

        Ok(Evaluation {
            fitness: objective + penalties.total(),
            p_loss_mw,
            q_loss_mvar: solution.q_loss_total,
            vd,
            dg_cost: cost,
            penalties,
            converged: true,
            solution,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caseio::parse_case_text;
    use crate::grid::{Branch, Bus};
    use crate::powerflow::solve;
    use approx::assert_relative_eq;

    fn ieee14() -> Network<f64> {
        parse_case_text(crate::cases::ieee14_text()).unwrap()
    }

    fn small_net() -> Network<f64> {
        let mut n = Network::new("three", 100.0);
        let mut slack = Bus::load(1, 0.0, 0.0);
        slack.kind = BusKind::Slack;
        slack.v_setpoint = 1.02;
        n.buses.push(slack);
        n.buses.push(Bus::load(2, 0.45, 0.15));
        n.buses.push(Bus::load(3, 0.30, 0.10));
        n.branches.push(Branch::line(1, 2, 0.02, 0.06, 0.03));
        n.branches.push(Branch::line(2, 3, 0.025, 0.08, 0.02));
        n.branches.push(Branch::line(1, 3, 0.03, 0.09, 0.02));
        n
    }

    #[test]
    fn exact_loss_zero_when_injections_zero() {
        let n = small_net();
        let sol = solve(&n, &SolveOptions::default()).unwrap();
        let coeffs = LossCoefficients::from_solution(&n, &sol).unwrap();
        let zeros = vec![0.0; n.bus_count()];
        assert_eq!(coeffs.loss(&zeros, &zeros), 0.0);
    }

    #[test]
    fn exact_loss_matches_branch_sum_on_ieee14() {
        let n = ieee14();
        let sol = solve(&n, &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        let pl_pu = exact_loss(&n, &sol).unwrap();
        let branch_pu = sol.p_loss_total / n.base_mva;
        assert!(
            (pl_pu - branch_pu).abs() <= 1e-8,
            "exact {pl_pu} vs branch {branch_pu}"
        );
        // and the 14-bus base loss lands within +-5% of the published 13.593 MW
        let mw = pl_pu * n.base_mva;
        assert!((mw - 13.593).abs() / 13.593 < 0.05, "loss {mw} MW");
    }

    #[test]
    fn voltage_deviation_arithmetic() {
        let mut n = small_net();
        n.buses[1].p_demand = 0.0;
        n.buses[2].p_demand = 0.0;
        let mut sol = solve(&n, &SolveOptions::default()).unwrap();
        sol.state.v[1] = 0.99;
        sol.state.v[2] = 1.02;
        assert_relative_eq!(voltage_deviation(&n, &sol, 1.0), 0.03, epsilon = 1e-12);
    }

    #[test]
    fn voltage_deviation_ignores_non_pq() {
        let n = ieee14();
        let sol = solve(&n, &SolveOptions::default()).unwrap();
        let vd = voltage_deviation(&n, &sol, 1.0);
        let manual: f64 = n
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Pq)
            .map(|(i, _)| (sol.state.v[i] - 1.0).abs())
            .sum();
        assert_relative_eq!(vd, manual);
    }

    #[test]
    fn dg_cost_is_linear() {
        let cost = CostParameters::default();
        let p1 = DgPlacement::from_pairs([(2, 10.0), (3, 20.0)]);
        assert_relative_eq!(dg_cost(&p1, &cost), 30.0);
        let p2 = DgPlacement::from_pairs([(2, 20.0), (3, 40.0)]);
        assert_relative_eq!(dg_cost(&p2, &cost), 2.0 * dg_cost(&p1, &cost));
        assert_relative_eq!(dg_cost(&DgPlacement::new(), &cost), 0.0);
    }

    #[test]
    fn zero_sizes_reproduce_base_case() {
        let n = ieee14();
        let problem =
            SizingProblem::new(n, vec![2, 8, 9, 10], 1.0, 50.0, ObjectiveMode::Technical).unwrap();
        let eval = problem.evaluate(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(eval.converged);
        assert_relative_eq!(eval.p_loss_mw, problem.base_loss_mw(), epsilon = 1e-9);
        assert_relative_eq!(
            eval.fitness,
            eval.p_loss_mw + eval.penalties.total(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn technical_fitness_equals_exact_loss_without_violations() {
        // relaxed band so no violations occur
        let mut n = ieee14();
        n.v_band = Some((0.5, 1.5));
        let problem =
            SizingProblem::new(n, vec![9, 10], 1.0, 50.0, ObjectiveMode::Technical).unwrap();
        let eval = problem.evaluate(&[10.0, 5.0]).unwrap();
        assert_eq!(eval.penalties.total(), 0.0);
        assert_eq!(eval.fitness, eval.p_loss_mw);
    }

    #[test]
    fn band_violation_raises_fitness_above_loss() {
        let mut n = ieee14();
        n.v_band = Some((0.98, 1.01)); // the published band; setpoints violate it
        let problem =
            SizingProblem::new(n, vec![9, 10], 1.0, 50.0, ObjectiveMode::Technical).unwrap();
        let eval = problem.evaluate(&[10.0, 5.0]).unwrap();
        assert!(eval.penalties.voltage > 0.0);
        assert!(eval.fitness > eval.p_loss_mw);
    }

    #[test]
    fn tightening_the_band_never_decreases_fitness() {
        // same sizes, progressively tighter bands: violations grow, loss is
        // unchanged, so fitness must be non-decreasing
        let sizes = [10.0, 10.0];
        let mut last = f64::NEG_INFINITY;
        for hi in [1.5, 1.05, 1.03, 1.01] {
            let mut n = ieee14();
            n.v_band = Some((0.5, hi));
            let problem =
                SizingProblem::new(n, vec![9, 10], 1.0, 50.0, ObjectiveMode::Technical).unwrap();
            let eval = problem.evaluate(&sizes).unwrap();
            assert!(
                eval.fitness >= last,
                "fitness {} fell below {} at band hi {}",
                eval.fitness,
                last,
                hi
            );
            last = eval.fitness;
        }
    }

    #[test]
    fn table3_sizes_reduce_loss_below_base() {
        let n = ieee14();
        let problem = SizingProblem::new(
            n,
            vec![2, 8, 9, 10],
            1.0,
            50.0,
            ObjectiveMode::Technical,
        )
        .unwrap();
        let eval = problem
            .evaluate(&[41.191, 42.133, 13.823, 38.777])
            .unwrap();
        assert!(eval.converged);
        assert!(
            eval.p_loss_mw < problem.base_loss_mw(),
            "loss {} not below base {}",
            eval.p_loss_mw,
            problem.base_loss_mw()
        );
    }

    #[test]
    fn techno_economic_adds_cost_term() {
        let n = ieee14();
        let tech = SizingProblem::new(
            n.clone(),
            vec![2, 8, 9, 10],
            1.0,
            50.0,
            ObjectiveMode::Technical,
        )
        .unwrap();
        let eco = SizingProblem::new(
            n,
            vec![2, 8, 9, 10],
            1.0,
            50.0,
            ObjectiveMode::TechnoEconomic,
        )
        .unwrap();
        let sizes = [20.0, 20.0, 20.0, 20.0];
        let et = tech.evaluate(&sizes).unwrap();
        let ee = eco.evaluate(&sizes).unwrap();
        let expected_term = (80.0 / 200.0) * eco.base_loss_mw();
        assert_relative_eq!(ee.fitness - et.fitness, expected_term, epsilon = 1e-9);
    }

    #[test]
    fn evaluate_is_deterministic() {
        let n = ieee14();
        let problem =
            SizingProblem::new(n, vec![2, 8, 9, 10], 1.0, 50.0, ObjectiveMode::Technical).unwrap();
        let sizes = [17.5, 42.0, 3.25, 8.125];
        let a = problem.evaluate(&sizes).unwrap();
        let b = problem.evaluate(&sizes).unwrap();
        assert_eq!(a.fitness.to_bits(), b.fitness.to_bits());
        assert_eq!(a.p_loss_mw.to_bits(), b.p_loss_mw.to_bits());
        assert_eq!(a.vd.to_bits(), b.vd.to_bits());
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let n = ieee14();
        let problem =
            SizingProblem::new(n, vec![2, 8], 1.0, 50.0, ObjectiveMode::Technical).unwrap();
        assert!(matches!(
            problem.evaluate(&[1.0]),
            Err(ObjectiveError::DimensionMismatch { got: 1, expected: 2 })
        ));
    }
}
