//! Shared reference implementations for the oracle and acceptance suites.
//! Everything here is written independently of the production code paths it
//! is used to check.

#![allow(dead_code)]

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dgplan_core::caseio::parse_case_text;
use dgplan_core::cases;
use dgplan_core::grid::{build_admittance_matrix, Branch, Bus, BusKind, Network};
use dgplan_core::powerflow::{
    assemble_jacobian, compute_mismatch, solve, BusSets, PowerFlowState, SolveOptions,
};

pub fn ieee14() -> Network<f64> {
    parse_case_text(cases::ieee14_text()).unwrap()
}

pub fn ieee30() -> Network<f64> {
    parse_case_text(cases::ieee30_text()).unwrap()
}

/// Element-by-element primitive-admittance accumulation, written without any
/// shared code with the production builder.
pub fn naive_ybus(network: &Network<f64>) -> Vec<Complex<f64>> {
    let n = network.buses.len();
    let idx = |id: usize| network.buses.iter().position(|b| b.id == id).unwrap();
    let mut y = vec![Complex::new(0.0, 0.0); n * n];
    for br in &network.branches {
        let f = idx(br.from);
        let t = idx(br.to);
        let z = Complex::new(br.r, br.x);
        let ys = Complex::new(1.0, 0.0) / z;
        let bc = Complex::new(0.0, br.b_charging / 2.0);
        let a = br.tap_ratio;
        y[f * n + f] += ys / (a * a) + bc / (a * a);
        y[t * n + t] += ys + bc;
        y[f * n + t] -= ys / a;
        y[t * n + f] -= ys / a;
    }
    for (i, bus) in network.buses.iter().enumerate() {
        y[i * n + i] += Complex::new(bus.shunt_g, bus.shunt_b);
    }
    y
}

/// Naive double-loop polar evaluation of the injection equations using the
/// |Y|, theta convention.
pub fn naive_injections(
    network: &Network<f64>,
    state: &PowerFlowState<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let n = network.buses.len();
    let y = naive_ybus(network);
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let yij = y[i * n + j];
            let (ymag, theta) = (yij.norm(), yij.arg());
            let angle = state.delta[i] - state.delta[j] - theta;
            p[i] += state.v[i] * state.v[j] * ymag * angle.cos();
            q[i] += state.v[i] * state.v[j] * ymag * angle.sin();
        }
    }
    (p, q)
}

/// Gauss-Seidel reference solver for networks of one slack plus PQ buses.
pub fn gauss_seidel(network: &Network<f64>, tol: f64, max_iter: usize) -> (Vec<f64>, Vec<f64>) {
    let n = network.buses.len();
    let y = naive_ybus(network);
    let slack = network
        .buses
        .iter()
        .position(|b| b.kind == BusKind::Slack)
        .unwrap();
    let mut v: Vec<Complex<f64>> = network
        .buses
        .iter()
        .map(|b| {
            if b.kind == BusKind::Slack {
                Complex::new(b.v_setpoint, 0.0)
            } else {
                Complex::new(1.0, 0.0)
            }
        })
        .collect();
    for _ in 0..max_iter {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            if i == slack {
                continue;
            }
            assert_eq!(network.buses[i].kind, BusKind::Pq, "oracle handles PQ only");
            let s = Complex::new(
                network.buses[i].p_gen - network.buses[i].p_demand,
                network.buses[i].q_gen - network.buses[i].q_demand,
            );
            let mut sum = Complex::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    sum += y[i * n + j] * v[j];
                }
            }
            let updated = ((s / v[i]).conj() - sum) / y[i * n + i];
            worst = worst.max((updated - v[i]).norm());
            v[i] = updated;
        }
        if worst < tol {
            break;
        }
    }
    (
        v.iter().map(|c| c.norm()).collect(),
        v.iter().map(|c| c.arg()).collect(),
    )
}

/// Random voltage/angle state in an operationally plausible band.
pub fn random_state(network: &Network<f64>, rng: &mut ChaCha8Rng) -> PowerFlowState<f64> {
    let mut state = PowerFlowState::flat(network);
    for i in 0..network.buses.len() {
        state.v[i] = 0.95 + rng.gen::<f64>() * 0.10;
        state.delta[i] = -0.3 + rng.gen::<f64>() * 0.6;
    }
    state
}

/// Checks every Jacobian entry against central finite differences of the
/// mismatch with step `h`; tolerance is relative with a floor of 1 on the
/// scale.
pub fn check_jacobian_fd(
    network: &Network<f64>,
    state: &PowerFlowState<f64>,
    h: f64,
    tol: f64,
) {
    let ybus = build_admittance_matrix(network).unwrap();
    let sets = BusSets::of(network).unwrap();
    let jac = assemble_jacobian(&ybus, &sets, state);
    let na = sets.angle_buses.len();
    let order = jac.order();

    let eval = |state: &PowerFlowState<f64>| -> Vec<f64> {
        compute_mismatch(network, &ybus, &sets, state).stacked()
    };

    for col in 0..order {
        let mut plus = state.clone();
        let mut minus = state.clone();
        if col < na {
            plus.delta[sets.angle_buses[col]] += h;
            minus.delta[sets.angle_buses[col]] -= h;
        } else {
            plus.v[sets.vmag_buses[col - na]] += h;
            minus.v[sets.vmag_buses[col - na]] -= h;
        }
        let f_plus = eval(&plus);
        let f_minus = eval(&minus);
        for row in 0..order {
            let fd = -(f_plus[row] - f_minus[row]) / (2.0 * h);
            let analytic = jac.get(row, col);
            let scale = analytic.abs().max(1.0);
            assert!(
                (analytic - fd).abs() <= tol * scale,
                "J[{row},{col}] analytic {analytic} vs fd {fd}"
            );
        }
    }
}

/// dP_L/dP_j by two perturbed solves at +-h pu of added injection.
pub fn fd_sensitivity(network: &Network<f64>, bus_id: usize, h: f64) -> f64 {
    let mut loss = [0.0; 2];
    for (k, sign) in [1.0, -1.0].iter().enumerate() {
        let mut perturbed = network.clone();
        let idx = perturbed.index_of(bus_id).unwrap();
        perturbed.buses[idx].p_gen += sign * h;
        let options = SolveOptions {
            tolerance: 1e-12,
            ..SolveOptions::default()
        };
        let solution = solve(&perturbed, &options).unwrap();
        assert!(solution.converged);
        loss[k] = solution.p_loss_total / perturbed.base_mva;
    }
    (loss[0] - loss[1]) / (2.0 * h)
}

/// Deterministic pseudorandom small network: radial spine plus one chord,
/// loads spread over the non-slack buses, charging on every line.
pub fn random_small_network(seed: u64, n_buses: usize) -> Network<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut network = Network::new(format!("rand{n_buses}-{seed}"), 100.0);
    let mut slack = Bus::load(1, 0.0, 0.0);
    slack.kind = BusKind::Slack;
    slack.v_setpoint = 1.0 + rng.gen::<f64>() * 0.04;
    network.buses.push(slack);
    for id in 2..=n_buses {
        let p = 0.05 + rng.gen::<f64>() * 0.30;
        let q = p * (0.2 + rng.gen::<f64>() * 0.3);
        network.buses.push(Bus::load(id, p, q));
    }
    for id in 2..=n_buses {
        let parent = 1 + rng.gen_range(0..id - 1);
        let r = 0.01 + rng.gen::<f64>() * 0.05;
        let x = r * (2.0 + rng.gen::<f64>() * 2.0);
        network
            .branches
            .push(Branch::line(parent, id, r, x, 0.01 + rng.gen::<f64>() * 0.03));
    }
    if n_buses >= 4 {
        let r = 0.02 + rng.gen::<f64>() * 0.04;
        network
            .branches
            .push(Branch::line(2, n_buses, r, r * 3.0, 0.02));
    }
    network
}
