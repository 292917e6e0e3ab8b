//! Seeded, reproducible pseudo-randomness.
//!
//! Backed by ChaCha8 (`rand_chacha`), seeded from a `u64`. Independent streams
//! of the same seed are used to keep instance data and initial points apart.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::vector::Vector;

/// Deterministic generator: equal `(seed, stream)` gives equal output.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A draw from the open interval `(lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let v = self.inner.gen_range(lo..hi);
            if v > lo {
                return v;
            }
        }
    }

    /// A draw from the closed interval `[lo, hi]`.
    pub fn uniform_closed(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..=hi)
    }

    /// A vector with i.i.d. coordinates uniform on `(lo, hi)`.
    pub fn sample_uniform_box(&mut self, dim: usize, lo: f64, hi: f64) -> Result<Vector> {
        if !(lo < hi) {
            return Err(invalid(format!("empty sampling box: lo={lo} must be < hi={hi}")));
        }
        if dim == 0 {
            return Err(invalid("sampling dimension must be at least 1"));
        }
        Vector::new((0..dim).map(|_| self.uniform(lo, hi)).collect())
    }
}

/// Free-function form of [`Rng::sample_uniform_box`].
pub fn sample_uniform_box(rng: &mut Rng, dim: usize, lo: f64, hi: f64) -> Result<Vector> {
    rng.sample_uniform_box(dim, lo, hi)
}
