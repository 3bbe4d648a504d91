//! Independent-oracle checks: every numeric path in the crate is compared
//! against a slower, separately-written reference computation.

mod common;

use common::{
    check_jacobian_fd, fd_sensitivity, gauss_seidel, ieee14, ieee30, naive_injections,
    naive_ybus, random_small_network, random_state,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dgplan_core::grid::{
    apply_dg_injections, build_admittance_matrix, Branch, Bus, BusKind, DgPlacement, Network,
};
use dgplan_core::objectives::exact_loss;
use dgplan_core::powerflow::{compute_mismatch, solve, BusSets, SolveOptions};
use dgplan_core::sensitivity::loss_sensitivity;
use dgplan_core::total_losses;

#[test]
fn ybus_matches_naive_accumulation_on_ieee14() {
    let network = ieee14();
    let ybus = build_admittance_matrix(&network).unwrap();
    let reference = naive_ybus(&network);
    let n = network.buses.len();
    for i in 0..n {
        for j in 0..n {
            let got = ybus.get(i, j);
            let want = reference[i * n + j];
            assert!(
                (got - want).norm() <= 1e-12,
                "Y[{i},{j}] = {got} vs oracle {want}"
            );
        }
    }
}

#[test]
fn mismatch_matches_naive_polar_oracle_on_random_states() {
    let network = ieee14();
    let ybus = build_admittance_matrix(&network).unwrap();
    let sets = BusSets::of(&network).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let state = random_state(&network, &mut rng);
        let mismatch = compute_mismatch(&network, &ybus, &sets, &state);
        let (p_ref, q_ref) = naive_injections(&network, &state);
        for (row, &bus) in sets.angle_buses.iter().enumerate() {
            let expect = network.buses[bus].p_injection() - p_ref[bus];
            assert!(
                (mismatch.dp[row] - expect).abs() <= 1e-12,
                "dP[{bus}] {} vs {}",
                mismatch.dp[row],
                expect
            );
        }
        for (row, &bus) in sets.vmag_buses.iter().enumerate() {
            let expect = network.buses[bus].q_injection() - q_ref[bus];
            assert!(
                (mismatch.dq[row] - expect).abs() <= 1e-12,
                "dQ[{bus}] {} vs {}",
                mismatch.dq[row],
                expect
            );
        }
    }
}

#[test]
fn mismatch_vanishes_at_converged_state() {
    for network in [ieee14(), ieee30()] {
        let solution = solve(&network, &SolveOptions::default()).unwrap();
        assert!(solution.converged);
        let ybus = build_admittance_matrix(&network).unwrap();
        let sets = BusSets::of(&network).unwrap();
        let mismatch = compute_mismatch(&network, &ybus, &sets, &solution.state);
        assert!(mismatch.max_abs() <= 1e-8);
    }
}

#[test]
fn jacobian_matches_finite_differences_on_random_states() {
    for network in [ieee14(), ieee30()] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let state = random_state(&network, &mut rng);
            check_jacobian_fd(&network, &state, 1e-6, 1e-5);
        }
    }
}

#[test]
fn three_bus_newton_matches_gauss_seidel() {
    let mut network = Network::new("three-bus", 100.0);
    let mut slack = Bus::load(1, 0.0, 0.0);
    slack.kind = BusKind::Slack;
    slack.v_setpoint = 1.02;
    network.buses.push(slack);
    network.buses.push(Bus::load(2, 0.35, 0.12));
    network.buses.push(Bus::load(3, 0.25, 0.08));
    network.branches.push(Branch::line(1, 2, 0.02, 0.08, 0.02));
    network.branches.push(Branch::line(2, 3, 0.03, 0.10, 0.02));
    network.branches.push(Branch::line(1, 3, 0.025, 0.09, 0.02));

    let nr = solve(&network, &SolveOptions::default()).unwrap();
    assert!(nr.converged);
    let (v_gs, d_gs) = gauss_seidel(&network, 1e-13, 200_000);
    for i in 0..3 {
        assert!(
            (nr.state.v[i] - v_gs[i]).abs() <= 1e-8,
            "V[{i}] {} vs GS {}",
            nr.state.v[i],
            v_gs[i]
        );
        assert!(
            (nr.state.delta[i] - d_gs[i]).abs() <= 1e-8,
            "delta[{i}] {} vs GS {}",
            nr.state.delta[i],
            d_gs[i]
        );
    }
}

#[test]
fn exact_loss_equals_branch_sum_on_every_converged_solution() {
    let placements: [Vec<(usize, f64)>; 3] = [
        vec![],
        vec![(2, 41.191), (8, 42.133), (9, 13.823), (10, 38.777)],
        vec![(9, 25.0), (14, 10.0)],
    ];
    for base in [ieee14(), ieee30()] {
        for placement in &placements {
            let placed =
                apply_dg_injections(&base, &DgPlacement::from_pairs(placement.clone())).unwrap();
            let solution = solve(&placed, &SolveOptions::default()).unwrap();
            assert!(solution.converged);
            let quad_pu = exact_loss(&placed, &solution).unwrap();
            let branch_pu = solution.p_loss_total / placed.base_mva;
            assert!(
                (quad_pu - branch_pu).abs() <= 1e-8,
                "case {}: quadratic {quad_pu} vs branch {branch_pu}",
                placed.name
            );
        }
    }
}

#[test]
fn total_losses_free_function_matches_solution_totals() {
    let network = ieee14();
    let solution = solve(&network, &SolveOptions::default()).unwrap();
    let (p, q) = total_losses(&network, &solution.state);
    assert!((p - solution.p_loss_total).abs() <= 1e-12);
    assert!((q - solution.q_loss_total).abs() <= 1e-12);
}

#[test]
fn generation_covers_demand_plus_loss_at_convergence() {
    for network in [ieee14(), ieee30()] {
        let tol = 1e-8;
        let solution = solve(&network, &SolveOptions::default()).unwrap();
        assert!(solution.converged);
        let mut p_gen = 0.0;
        let mut q_gen = 0.0;
        for (i, bus) in network.buses.iter().enumerate() {
            match bus.kind {
                BusKind::Slack => {
                    p_gen += solution.p_injected[i] + bus.p_demand;
                    q_gen += solution.q_injected[i] + bus.q_demand;
                }
                BusKind::Pv => {
                    p_gen += bus.p_gen;
                    q_gen += solution.q_injected[i] + bus.q_demand;
                }
                BusKind::Pq => {
                    p_gen += bus.p_gen;
                    q_gen += bus.q_gen;
                }
            }
        }
        let p_demand: f64 = network.buses.iter().map(|b| b.p_demand).sum();
        let p_loss = solution.p_loss_total / network.base_mva;
        assert!(
            (p_gen - p_demand - p_loss).abs() <= 10.0 * tol,
            "case {}: real balance residual {}",
            network.name,
            p_gen - p_demand - p_loss
        );
        // reactive: includes charging/shunt production, so balance against the
        // net reactive absorbed by the network
        let q_demand: f64 = network.buses.iter().map(|b| b.q_demand).sum();
        let q_network: f64 = solution.q_injected.iter().sum::<f64>();
        let q_sched: f64 = q_gen - q_demand;
        assert!(
            (q_sched - q_network).abs() <= 10.0 * tol,
            "case {}: reactive balance residual {}",
            network.name,
            q_sched - q_network
        );
    }
}

#[test]
fn two_bus_sensitivity_matches_perturbation_oracle() {
    let mut network = Network::new("two-bus", 100.0);
    let mut slack = Bus::load(1, 0.0, 0.0);
    slack.kind = BusKind::Slack;
    network.buses.push(slack);
    network.buses.push(Bus::load(2, 0.5, 0.2));
    network.branches.push(Branch::line(1, 2, 0.05, 0.15, 0.04));

    let base = solve(&network, &SolveOptions::default()).unwrap();
    let lsf = loss_sensitivity(&network, &base).unwrap();
    assert_eq!(lsf.len(), 1);
    let (bus, analytic) = lsf[0];
    assert_eq!(bus, 2);
    let fd = fd_sensitivity(&network, 2, 1e-4);
    assert_eq!(analytic.signum(), fd.signum());
    let rel = (analytic - fd).abs() / fd.abs();
    assert!(rel <= 1e-3, "lsf {analytic} vs fd {fd} (rel {rel:.2e})");
}

#[test]
fn randomized_small_network_sensitivities_match_perturbation() {
    let mut checked = 0;
    for seed in 0..12u64 {
        let n_buses = 3 + (seed as usize % 4); // 3..=6
        let network = random_small_network(seed, n_buses);
        let base = solve(&network, &SolveOptions::default()).unwrap();
        assert!(base.converged, "seed {seed} base did not converge");
        let lsf = loss_sensitivity(&network, &base).unwrap();
        for &(bus, analytic) in &lsf {
            let fd = fd_sensitivity(&network, bus, 1e-4);
            let rel = (analytic - fd).abs() / fd.abs().max(1e-9);
            assert!(
                rel <= 1e-2,
                "seed {seed} bus {bus}: lsf {analytic} vs fd {fd} (rel {rel:.2e})"
            );
            checked += 1;
        }
    }
    assert!(checked > 30, "only {checked} sensitivities exercised");
}
