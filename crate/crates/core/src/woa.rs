//! Whale optimization algorithm over the DG-size decision vector.
//!
//! Three position updates drive the search, selected per whale by the random
//! scalars p and A:
//!
//! * encircling (p < 0.5, |A| < 1):  x' = best - A |C best - x|
//! * exploration (p < 0.5, |A| >= 1): x' = x_rand - A |C x_rand - x|
//! * spiral (p >= 0.5):              x' = |best - x| e^(b l) cos(2 pi l) + best
//!
//! The control scalar a decays linearly from 2 to 0 across iterations, so
//! |A| <= a shrinks the search toward pure exploitation. A, C, l and p are
//! per-whale scalars (one draw each per whale per iteration), applied to every
//! coordinate; every update clamps to the bounds.
//!
//! Draw order, fixed for reproducibility: initialization samples whales in
//! index order (one uniform per coordinate); each iteration visits whales in
//! index order drawing p, then r (shared by A and C), then l, then - only on
//! the exploration branch - the random whale index among the others. The best
//! position updates greedily inside the whale loop, so later whales see
//! improvements made earlier in the same iteration.

use std::time::Instant;

use rand::Rng;

use crate::scalar::{lit, Real};
use crate::swarm::{rng_for_seed, unit, Bounds, SwarmResult, SwarmRng};

/// WOA parameters. Defaults match the study configuration: 50 whales,
/// 150 iterations, spiral constant b = 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WoaConfig<T> {
    pub population: usize,
    pub max_iterations: usize,
    /// Spiral shape constant.
    pub b: T,
    pub seed: u64,
}

impl<T: Real> Default for WoaConfig<T> {
    fn default() -> Self {
        WoaConfig {
            population: 50,
            max_iterations: 150,
            b: T::one(),
            seed: 0,
        }
    }
}

/// Per-whale control scalars for one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams<T> {
    /// Linearly decaying envelope, 2 -> 0.
    pub a: T,
    /// A = 2 a r - a, in [-a, a].
    pub big_a: T,
    /// C = 2 r, in [0, 2].
    pub big_c: T,
    /// Spiral parameter, uniform in [-1, 1].
    pub l: T,
    /// Branch selector, uniform in [0, 1).
    pub p: T,
}

/// Draws the control scalars for iteration t. Draw order: p, then r (which
/// feeds both A and C), then l.
pub fn control_params<T: Real>(
    t: usize,
    max_iterations: usize,
    rng: &mut SwarmRng,
) -> ControlParams<T> {
    debug_assert!(t < max_iterations.max(1));
    let two = lit::<T>(2.0);
    let a = two * (T::one() - lit::<T>(t as f64) / lit::<T>(max_iterations.max(1) as f64));
    let p = unit::<T>(rng);
    let r = unit::<T>(rng);
    let big_a = two * a * r - a;
    let big_c = two * r;
    let l = two * unit::<T>(rng) - T::one();
    ControlParams {
        a,
        big_a,
        big_c,
        l,
        p,
    }
}

/// Encircling move toward the best position: x' = best - A |C best - x|.
pub fn encircle_update<T: Real>(
    x: &[T],
    best: &[T],
    big_a: T,
    big_c: T,
    bounds: &Bounds<T>,
) -> Vec<T> {
    x.iter()
        .zip(best)
        .map(|(&xi, &bi)| {
            let d = (big_c * bi - xi).abs();
            bounds.clamp(bi - big_a * d)
        })
        .collect()
}

/// Spiral move around the best position: x' = |best - x| e^(b l) cos(2 pi l) + best.
pub fn spiral_update<T: Real>(x: &[T], best: &[T], l: T, b: T, bounds: &Bounds<T>) -> Vec<T> {
    let two_pi = lit::<T>(2.0) * T::PI();
    let factor = (b * l).exp() * (two_pi * l).cos();
    x.iter()
        .zip(best)
        .map(|(&xi, &bi)| {
            let d = (bi - xi).abs();
            bounds.clamp(d * factor + bi)
        })
        .collect()
}

/// Exploration move toward a random whale: x' = x_rand - A |C x_rand - x|.
pub fn explore_update<T: Real>(
    x: &[T],
    x_rand: &[T],
    big_a: T,
    big_c: T,
    bounds: &Bounds<T>,
) -> Vec<T> {
    x.iter()
        .zip(x_rand)
        .map(|(&xi, &ri)| {
            let d = (big_c * ri - xi).abs();
            bounds.clamp(ri - big_a * d)
        })
        .collect()
}

/// Runs the optimizer to its iteration budget and returns the best-ever
/// position with the per-iteration convergence trace.
pub fn woa_optimize<T, F>(bounds: Bounds<T>, config: &WoaConfig<T>, mut f: F) -> SwarmResult<T>
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    let started = Instant::now();
    let mut rng = rng_for_seed(config.seed);

    let mut positions: Vec<Vec<T>> = (0..config.population)
        .map(|_| bounds.sample(&mut rng))
        .collect();
    let mut evaluations = 0usize;
    let mut best_position = positions[0].clone();
    let mut best_fitness = T::infinity();
    for pos in &positions {
        let fit = f(pos);
        evaluations += 1;
        if fit < best_fitness {
            best_fitness = fit;
            best_position = pos.clone();
        }
    }

    let mut convergence = Vec::with_capacity(config.max_iterations);
    for t in 0..config.max_iterations {
        for i in 0..config.population {
            let cp = control_params::<T>(t, config.max_iterations, &mut rng);
            let updated = if cp.p < lit(0.5) {
                if cp.big_a.abs() < T::one() {
                    encircle_update(&positions[i], &best_position, cp.big_a, cp.big_c, &bounds)
                } else {
                    // random whale among the others, in live positions
                    let mut idx = rng.gen_range(0..config.population.max(2) - 1);
                    if idx >= i {
                        idx += 1;
                    }
                    let x_rand = positions[idx % config.population].clone();
                    explore_update(&positions[i], &x_rand, cp.big_a, cp.big_c, &bounds)
                }
            } else {
                spiral_update(&positions[i], &best_position, cp.l, config.b, &bounds)
            };
            positions[i] = updated;
            let fit = f(&positions[i]);
            evaluations += 1;
            if fit < best_fitness {
                best_fitness = fit;
                best_position = positions[i].clone();
            }
        }
        convergence.push(best_fitness);
    }

    SwarmResult {
        best_position,
        best_fitness,
        convergence,
        iterations_run: config.max_iterations,
        evaluations,
        seed: config.seed,
        wall_time: started.elapsed(),
    }
}
