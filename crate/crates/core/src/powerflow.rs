//! Newton-Raphson AC load flow in polar form.
//!
//! The solver iterates mismatch -> Jacobian -> dense linear solve -> update
//! until the largest per-unit mismatch drops below tolerance. PV buses hold
//! their voltage magnitude at the setpoint and the slack bus absorbs the
//! residual power. Generator reactive limits (PV->PQ switching) are not
//! modelled.
//!
//! Angle convention: radians internally; reports convert to degrees.

use num_complex::Complex;

use crate::error::SolveError;
use crate::grid::{build_admittance_matrix, validate_network, AdmittanceMatrix, BusKind, Network};
use crate::linalg::lu_solve;
use crate::scalar::{lit, Real};

/// Voltage magnitudes and angles for every bus, plus the iteration count that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowState<T> {
    /// Per-bus voltage magnitude, per-unit.
    pub v: Vec<T>,
    /// Per-bus voltage angle, radians. The slack angle stays at its reference
    /// value (0 in this data model).
    pub delta: Vec<T>,
    pub iteration: usize,
}

impl<T: Real> PowerFlowState<T> {
    /// Flat start: V = 1 for PQ buses, V = setpoint for PV/slack, all angles 0.
    pub fn flat(network: &Network<T>) -> Self {
        let v = network
            .buses
            .iter()
            .map(|b| match b.kind {
                BusKind::Pq => T::one(),
                _ => b.v_setpoint,
            })
            .collect();
        PowerFlowState {
            v,
            delta: vec![T::zero(); network.buses.len()],
            iteration: 0,
        }
    }

    /// Complex voltage phasors.
    pub fn phasors(&self) -> Vec<Complex<T>> {
        self.v
            .iter()
            .zip(&self.delta)
            .map(|(&vm, &va)| Complex::from_polar(vm, va))
            .collect()
    }
}

/// Index bookkeeping for the reduced mismatch/Jacobian system.
#[derive(Debug, Clone)]
pub struct BusSets {
    pub slack: usize,
    /// Non-slack bus indices (angle variables / P rows), in bus order.
    pub angle_buses: Vec<usize>,
    /// PQ bus indices (magnitude variables / Q rows), in bus order.
    pub vmag_buses: Vec<usize>,
}

impl BusSets {
    pub fn of<T: Real>(network: &Network<T>) -> Result<Self, SolveError> {
        let report = validate_network(network);
        if !report.is_empty() {
            return Err(crate::error::ModelError::InvalidNetwork(report.to_string()).into());
        }
        let slack = network.slack_index().expect("validated network has one slack");
        let angle_buses = (0..network.buses.len()).filter(|&i| i != slack).collect();
        let vmag_buses = network
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Pq)
            .map(|(i, _)| i)
            .collect();
        Ok(BusSets {
            slack,
            angle_buses,
            vmag_buses,
        })
    }
}

/// Calculated complex injections S_i = V_i (Y V)_i* at a state, per-unit.
pub fn calculated_injections<T: Real>(
    ybus: &AdmittanceMatrix<T>,
    state: &PowerFlowState<T>,
) -> (Vec<T>, Vec<T>) {
    let v = state.phasors();
    let i_inj = ybus.mul_vec(&v);
    let mut p = Vec::with_capacity(v.len());
    let mut q = Vec::with_capacity(v.len());
    for (vi, ii) in v.iter().zip(&i_inj) {
        let s = vi * ii.conj();
        p.push(s.re);
        q.push(s.im);
    }
    (p, q)
}

/// Power mismatches: scheduled minus calculated injections.
#[derive(Debug, Clone)]
pub struct Mismatch<T> {
    /// Delta-P for every non-slack bus, in [`BusSets::angle_buses`] order.
    pub dp: Vec<T>,
    /// Delta-Q for every PQ bus, in [`BusSets::vmag_buses`] order.
    pub dq: Vec<T>,
}

impl<T: Real> Mismatch<T> {
    /// Stacked residual vector [dP; dQ] matching the Jacobian row order.
    pub fn stacked(&self) -> Vec<T> {
        let mut out = self.dp.clone();
        out.extend_from_slice(&self.dq);
        out
    }

    /// Largest absolute entry, per-unit.
    pub fn max_abs(&self) -> T {
        self.dp
            .iter()
            .chain(self.dq.iter())
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }
}

/// Evaluates the power mismatches at a state.
pub fn compute_mismatch<T: Real>(
    network: &Network<T>,
    ybus: &AdmittanceMatrix<T>,
    sets: &BusSets,
    state: &PowerFlowState<T>,
) -> Mismatch<T> {
    let (p_calc, q_calc) = calculated_injections(ybus, state);
    let dp = sets
        .angle_buses
        .iter()
        .map(|&i| network.buses[i].p_injection() - p_calc[i])
        .collect();
    let dq = sets
        .vmag_buses
        .iter()
        .map(|&i| network.buses[i].q_injection() - q_calc[i])
        .collect();
    Mismatch { dp, dq }
}

/// Polar-form power-flow Jacobian with block views.
///
/// Row order is [P rows for non-slack; Q rows for PQ]; column order is
/// [angles for non-slack; magnitudes for PQ]. The four blocks are
/// J1 = dP/d(delta), J3 = dP/dV, J2 = dQ/d(delta), J4 = dQ/dV.
#[derive(Debug, Clone)]
pub struct Jacobian<T> {
    pub angle_buses: Vec<usize>,
    pub vmag_buses: Vec<usize>,
    matrix: Vec<T>,
    order: usize,
}

impl<T: Real> Jacobian<T> {
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.matrix[row * self.order + col]
    }

    /// dP_(angle_buses[i]) / d(delta)_(angle_buses[j])
    pub fn j1(&self, i: usize, j: usize) -> T {
        self.get(i, j)
    }

    /// dQ_(vmag_buses[i]) / d(delta)_(angle_buses[j])
    pub fn j2(&self, i: usize, j: usize) -> T {
        self.get(self.angle_buses.len() + i, j)
    }

    /// dP_(angle_buses[i]) / dV_(vmag_buses[j])
    pub fn j3(&self, i: usize, j: usize) -> T {
        self.get(i, self.angle_buses.len() + j)
    }

    /// dQ_(vmag_buses[i]) / dV_(vmag_buses[j])
    pub fn j4(&self, i: usize, j: usize) -> T {
        self.get(self.angle_buses.len() + i, self.angle_buses.len() + j)
    }

    pub fn into_matrix(self) -> Vec<T> {
        self.matrix
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }
}

/// Assembles the Jacobian of the calculated injections at a state.
pub fn assemble_jacobian<T: Real>(
    ybus: &AdmittanceMatrix<T>,
    sets: &BusSets,
    state: &PowerFlowState<T>,
) -> Jacobian<T> {
    let (p_calc, q_calc) = calculated_injections(ybus, state);
    let na = sets.angle_buses.len();
    let nm = sets.vmag_buses.len();
    let order = na + nm;
    let mut m = vec![T::zero(); order * order];
    let v = &state.v;
    let d = &state.delta;

    let g = |i: usize, j: usize| ybus.get(i, j).re;
    let b = |i: usize, j: usize| ybus.get(i, j).im;

    // P rows
    for (row, &i) in sets.angle_buses.iter().enumerate() {
        for (col, &j) in sets.angle_buses.iter().enumerate() {
            m[row * order + col] = if i == j {
                -q_calc[i] - b(i, i) * v[i] * v[i]
            } else {
                let dij = d[i] - d[j];
                v[i] * v[j] * (g(i, j) * dij.sin() - b(i, j) * dij.cos())
            };
        }
        for (col, &j) in sets.vmag_buses.iter().enumerate() {
            m[row * order + na + col] = if i == j {
                p_calc[i] / v[i] + g(i, i) * v[i]
            } else {
                let dij = d[i] - d[j];
                v[i] * (g(i, j) * dij.cos() + b(i, j) * dij.sin())
            };
        }
    }
    // Q rows
    for (row, &i) in sets.vmag_buses.iter().enumerate() {
        for (col, &j) in sets.angle_buses.iter().enumerate() {
            m[(na + row) * order + col] = if i == j {
                p_calc[i] - g(i, i) * v[i] * v[i]
            } else {
                let dij = d[i] - d[j];
                -v[i] * v[j] * (g(i, j) * dij.cos() + b(i, j) * dij.sin())
            };
        }
        for (col, &j) in sets.vmag_buses.iter().enumerate() {
            m[(na + row) * order + na + col] = if i == j {
                q_calc[i] / v[i] - b(i, i) * v[i]
            } else {
                let dij = d[i] - d[j];
                v[i] * (g(i, j) * dij.sin() - b(i, j) * dij.cos())
            };
        }
    }

    Jacobian {
        angle_buses: sets.angle_buses.clone(),
        vmag_buses: sets.vmag_buses.clone(),
        matrix: m,
        order,
    }
}

/// Starting point for the iteration.
#[derive(Debug, Clone, Default)]
pub enum StartPoint<T> {
    /// V = 1 (PQ) / setpoint (PV, slack), angles 0.
    #[default]
    Flat,
    /// Resume from a previous state (must match the network dimensions).
    From(PowerFlowState<T>),
}

/// Solver options. Defaults: tolerance 1e-8 pu on the max mismatch, at most 50
/// iterations, flat start.
#[derive(Debug, Clone)]
pub struct SolveOptions<T> {
    pub tolerance: T,
    pub max_iterations: usize,
    pub start: StartPoint<T>,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            tolerance: lit(1e-8),
            max_iterations: 50,
            start: StartPoint::Flat,
        }
    }
}

/// Per-branch series flow quantities at a solved state.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlow<T> {
    /// |I_series| through the branch, per-unit.
    pub current: T,
    /// Series real loss |I|^2 r, MW.
    pub p_loss_mw: T,
    /// Series reactive loss |I|^2 x, MVAr.
    pub q_loss_mvar: T,
}

/// Converged (or best-effort) load-flow result.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution<T> {
    pub state: PowerFlowState<T>,
    /// Calculated net real injection per bus, per-unit.
    pub p_injected: Vec<T>,
    /// Calculated net reactive injection per bus, per-unit.
    pub q_injected: Vec<T>,
    /// Total series real loss, MW.
    pub p_loss_total: T,
    /// Total series reactive loss, MVAr.
    pub q_loss_total: T,
    pub branch_flows: Vec<BranchFlow<T>>,
    pub converged: bool,
    /// Largest final mismatch, per-unit.
    pub max_mismatch: T,
    pub iterations: usize,
}

impl<T: Real> PowerFlowSolution<T> {
    /// Per-branch (MW, MVAr) series losses.
    pub fn branch_losses(&self) -> Vec<(T, T)> {
        self.branch_flows
            .iter()
            .map(|f| (f.p_loss_mw, f.q_loss_mvar))
            .collect()
    }
}

/// Series branch flows and total losses (MW/MVAr) at a state.
pub fn branch_flows<T: Real>(network: &Network<T>, state: &PowerFlowState<T>) -> Vec<BranchFlow<T>> {
    let v = state.phasors();
    network
        .branches
        .iter()
        .map(|br| {
            let f = network.index_of(br.from).expect("validated endpoint");
            let t = network.index_of(br.to).expect("validated endpoint");
            let i_series = (v[f] / br.tap_ratio - v[t]) * br.series_admittance();
            let m2 = i_series.norm_sqr();
            BranchFlow {
                current: m2.sqrt(),
                p_loss_mw: m2 * br.r * network.base_mva,
                q_loss_mvar: m2 * br.x * network.base_mva,
            }
        })
        .collect()
}

/// Sums per-branch series losses; returns (MW, MVAr) on the system base.
pub fn total_losses<T: Real>(network: &Network<T>, state: &PowerFlowState<T>) -> (T, T) {
    let flows = branch_flows(network, state);
    let p = flows.iter().map(|f| f.p_loss_mw).sum();
    let q = flows.iter().map(|f| f.q_loss_mvar).sum();
    (p, q)
}

/// Full Newton-Raphson solve.
pub fn solve<T: Real>(
    network: &Network<T>,
    options: &SolveOptions<T>,
) -> Result<PowerFlowSolution<T>, SolveError> {
    let ybus = build_admittance_matrix(network).map_err(SolveError::Model)?;
    solve_prepared(network, &ybus, options)
}

/// Newton-Raphson solve with a pre-built admittance matrix (hot path for the
/// optimizers, whose candidate networks share one Ybus).
pub fn solve_prepared<T: Real>(
    network: &Network<T>,
    ybus: &AdmittanceMatrix<T>,
    options: &SolveOptions<T>,
) -> Result<PowerFlowSolution<T>, SolveError> {
    let sets = BusSets::of(network)?;
    let mut state = match &options.start {
        StartPoint::Flat => PowerFlowState::flat(network),
        StartPoint::From(s) => {
            let mut s = s.clone();
            s.iteration = 0;
            s
        }
    };

    let na = sets.angle_buses.len();
    let order = na + sets.vmag_buses.len();
    let mut converged = false;
    let mut max_mismatch = T::infinity();

    for it in 0..=options.max_iterations {
        state.iteration = it;
        let mismatch = compute_mismatch(network, ybus, &sets, &state);
        max_mismatch = mismatch.max_abs();
        if max_mismatch <= options.tolerance {
            converged = true;
            break;
        }
        if it == options.max_iterations {
            break;
        }
        let jac = assemble_jacobian(ybus, &sets, &state);
        let mut a = jac.into_matrix();
        let mut rhs = mismatch.stacked();
        lu_solve(&mut a, &mut rhs, order)
            .map_err(|_| SolveError::SingularJacobian { iteration: it })?;
        for (k, &bus) in sets.angle_buses.iter().enumerate() {
            state.delta[bus] = state.delta[bus] + rhs[k];
        }
        for (k, &bus) in sets.vmag_buses.iter().enumerate() {
            state.v[bus] = state.v[bus] + rhs[na + k];
        }
    }

    let (p_injected, q_injected) = calculated_injections(ybus, &state);
    let flows = branch_flows(network, &state);
    let p_loss_total = flows.iter().map(|f| f.p_loss_mw).sum();
    let q_loss_total = flows.iter().map(|f| f.q_loss_mvar).sum();
    let iterations = state.iteration;
    Ok(PowerFlowSolution {
        state,
        p_injected,
        q_injected,
        p_loss_total,
        q_loss_total,
        branch_flows: flows,
        converged,
        max_mismatch,
        iterations,
    })
}
