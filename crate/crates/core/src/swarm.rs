//! Shared machinery for the swarm optimizers: search box, seeded RNG draws and
//! the common result type.
//!
//! Both optimizers use ChaCha8 seeded from a 64-bit value. Draws are `f64`
//! uniform in [0, 1) converted into the working scalar, so the draw sequence
//! is identical for every scalar width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{lit, Real};

/// The deterministic generator used by both optimizers.
pub type SwarmRng = ChaCha8Rng;

/// Creates the generator for a 64-bit seed.
pub fn rng_for_seed(seed: u64) -> SwarmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One uniform draw in [0, 1).
#[inline]
pub fn unit<T: Real>(rng: &mut SwarmRng) -> T {
    lit(rng.gen::<f64>())
}

/// Axis-aligned search box: every coordinate lies in [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T> {
    pub lo: T,
    pub hi: T,
    pub dim: usize,
}

impl<T: Real> Bounds<T> {
    pub fn new(lo: T, hi: T, dim: usize) -> Self {
        debug_assert!(lo < hi);
        debug_assert!(dim > 0);
        Bounds { lo, hi, dim }
    }

    pub fn range(&self) -> T {
        self.hi - self.lo
    }

    #[inline]
    pub fn clamp(&self, x: T) -> T {
        x.max(self.lo).min(self.hi)
    }

    pub fn contains(&self, position: &[T]) -> bool {
        position.iter().all(|&x| x >= self.lo && x <= self.hi)
    }

    /// Uniform point in the box; one draw per coordinate, coordinate order.
    pub fn sample(&self, rng: &mut SwarmRng) -> Vec<T> {
        (0..self.dim)
            .map(|_| self.lo + unit::<T>(rng) * self.range())
            .collect()
    }
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone)]
pub struct SwarmResult<T> {
    pub best_position: Vec<T>,
    pub best_fitness: T,
    /// Best-so-far fitness after each iteration (length = iterations_run).
    pub convergence: Vec<T>,
    pub iterations_run: usize,
    pub evaluations: usize,
    pub seed: u64,
    pub wall_time: std::time::Duration,
}

impl<T: Real> SwarmResult<T> {
    /// The convergence trace is non-increasing and ends at the best fitness.
    pub fn check_invariants(&self) -> bool {
        let monotone = self
            .convergence
            .windows(2)
            .all(|w| w[1] <= w[0]);
        let tail_ok = match self.convergence.last() {
            Some(&last) => last == self.best_fitness,
            None => true,
        };
        monotone && tail_ok
    }
}
