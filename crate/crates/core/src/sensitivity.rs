//! Loss sensitivity factors: the derivative of total real loss with respect to
//! real injection at each non-slack bus, evaluated once at the base case.
//!
//! The derivative is computed exactly through the converged power-flow
//! Jacobian: with state x = (angles, PQ magnitudes) and residuals
//! F(x, u) = sched(u) - calc(x) = 0, a change du in the scheduled injection at
//! one bus moves the state by dx = J^-1 e, so
//!
//! ```text
//! dP_L/dP_j = (grad_x P_L)^T J^-1 e_j   =>   solve J^T lambda = grad_x P_L
//! ```
//!
//! and lambda's P-row entries are the per-bus sensitivities (one adjoint solve
//! for every bus at once). Negative values mark buses where added injection
//! reduces system loss. Values are normalized to [0, 1] and candidates are the
//! buses whose normalized value is closest to zero, i.e. the most negative raw
//! sensitivities first.

use crate::error::SensitivityError;
use crate::grid::{build_admittance_matrix, BusId, Network};
use crate::linalg::lu_solve;
use crate::powerflow::{assemble_jacobian, BusSets, PowerFlowSolution};
use crate::scalar::Real;

/// Per-bus loss sensitivities with their normalization and selection order.
#[derive(Debug, Clone)]
pub struct SensitivityRanking<T> {
    /// (bus id, raw dP_L/dP_j) for every non-slack bus, in bus-table order.
    pub raw: Vec<(BusId, T)>,
    /// (bus id, normalized value in [0, 1]), same order as `raw`.
    pub normalized: Vec<(BusId, T)>,
    /// Bus ids sorted by the selection rule: normalized value ascending
    /// (closest to zero first), ties by ascending bus id.
    pub order: Vec<BusId>,
}

impl<T: Real> SensitivityRanking<T> {
    /// The first k entries of the selection order.
    pub fn candidates(&self, k: usize) -> Result<Vec<BusId>, SensitivityError> {
        if k == 0 || k > self.order.len() {
            return Err(SensitivityError::CandidateCountOutOfRange {
                k,
                max: self.order.len(),
            });
        }
        Ok(self.order[..k].to_vec())
    }
}

/// Raw loss sensitivity dP_L/dP_j for every non-slack bus at a converged base
/// solution, in bus-table order.
pub fn loss_sensitivity<T: Real>(
    network: &Network<T>,
    base: &PowerFlowSolution<T>,
) -> Result<Vec<(BusId, T)>, SensitivityError> {
    if !base.converged {
        return Err(SensitivityError::UnconvergedBase);
    }
    let ybus = build_admittance_matrix(network)
        .map_err(|e| SensitivityError::Solve(crate::error::SolveError::Model(e)))?;
    let sets = BusSets::of(network)?;
    let jac = assemble_jacobian(&ybus, &sets, &base.state);
    let order = jac.order();
    let na = sets.angle_buses.len();

    // grad of total loss wrt the state: column sums of the injection
    // derivatives over every bus row, including the slack
    let n = network.buses.len();
    let v = &base.state.v;
    let d = &base.state.delta;
    let g = |i: usize, j: usize| ybus.get(i, j).re;
    let b = |i: usize, j: usize| ybus.get(i, j).im;
    let p = &base.p_injected;
    let q = &base.q_injected;

    let mut grad = vec![T::zero(); order];
    for (col, &j) in sets.angle_buses.iter().enumerate() {
        let mut acc = T::zero();
        for i in 0..n {
            acc += if i == j {
                -q[i] - b(i, i) * v[i] * v[i]
            } else {
                let dij = d[i] - d[j];
                v[i] * v[j] * (g(i, j) * dij.sin() - b(i, j) * dij.cos())
            };
        }
        grad[col] = acc;
    }
    for (col, &j) in sets.vmag_buses.iter().enumerate() {
        let mut acc = T::zero();
        for i in 0..n {
            acc += if i == j {
                p[i] / v[i] + g(i, i) * v[i]
            } else {
                let dij = d[i] - d[j];
                v[i] * (g(i, j) * dij.cos() + b(i, j) * dij.sin())
            };
        }
        grad[na + col] = acc;
    }

    // adjoint solve with the transposed Jacobian
    let mut jt = vec![T::zero(); order * order];
    for r in 0..order {
        for c in 0..order {
            jt[c * order + r] = jac.get(r, c);
        }
    }
    let mut lambda = grad;
    lu_solve(&mut jt, &mut lambda, order)?;

    Ok(sets
        .angle_buses
        .iter()
        .enumerate()
        .map(|(row, &i)| (network.buses[i].id, lambda[row]))
        .collect())
}

/// Min-max normalization to [0, 1]: (x - min) / (max - min).
pub fn normalize<T: Real>(values: &[T]) -> Result<Vec<T>, SensitivityError> {
    let mut min = T::infinity();
    let mut max = T::neg_infinity();
    for &x in values {
        min = min.min(x);
        max = max.max(x);
    }
    if values.len() < 2 || !(max > min) {
        return Err(SensitivityError::DegenerateNormalization);
    }
    let span = max - min;
    Ok(values.iter().map(|&x| (x - min) / span).collect())
}

/// Full ranking at a converged base solution.
pub fn rank<T: Real>(
    network: &Network<T>,
    base: &PowerFlowSolution<T>,
) -> Result<SensitivityRanking<T>, SensitivityError> {
    let raw = loss_sensitivity(network, base)?;
    let values: Vec<T> = raw.iter().map(|&(_, x)| x).collect();
    let norm = normalize(&values)?;
    let normalized: Vec<(BusId, T)> = raw
        .iter()
        .map(|&(id, _)| id)
        .zip(norm.iter().copied())
        .collect();

    let mut order: Vec<(BusId, T)> = normalized.clone();
    order.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(SensitivityRanking {
        raw,
        normalized,
        order: order.into_iter().map(|(id, _)| id).collect(),
    })
}

/// Selects the k candidate buses whose normalized sensitivity is closest to
/// zero (ties by ascending bus id); the slack bus is never included.
pub fn select_candidates<T: Real>(
    ranking: &SensitivityRanking<T>,
    k: usize,
) -> Result<Vec<BusId>, SensitivityError> {
    ranking.candidates(k)
}
