//! Deterministic random streams with an explicit draw contract.
//!
//! Everything stochastic in this crate draws from [`RngStream`]: a ChaCha8
//! generator seeded from a single `u64`, with every higher-level draw defined
//! by a fixed transform of raw 64-bit outputs. A seed therefore pins the whole
//! draw sequence, and each method consumes a fixed number of raw outputs, so
//! two code paths that make the same calls against equal seeds see identical
//! values. The exact-replay tests (learner reductions, the game equivalence
//! check, parallel-equals-serial aggregation) all lean on this contract.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer, used to derive sub-stream seeds.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for sub-stream `id` of `base`: `splitmix64(splitmix64(base) ^ id)`.
///
/// Chaining this (base → label → run) gives every (experiment, agent, run)
/// triple its own stream without perturbing any other triple's stream.
#[inline]
pub fn derive_seed(base: u64, id: u64) -> u64 {
    splitmix64(splitmix64(base) ^ id)
}

/// Seeded stream of uniform/integer/normal draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn seed_from(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Raw 64-bit generator output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform real in `[0, 1)`: `(next_u64() >> 11) · 2⁻⁵³`. One raw output.
    #[inline]
    pub fn uniform_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `{0, …, n−1}`: `⌊uniform_f64() · n⌋`, clamped to
    /// `n−1`. Exactly one raw output regardless of `n`.
    #[inline]
    pub fn uniform_int(&mut self, n: usize) -> usize {
        assert!(n >= 1, "uniform_int requires a non-empty range");
        ((self.uniform_f64() * n as f64) as usize).min(n - 1)
    }

    /// Standard normal via Box–Muller: `√(−2·ln(1−u₁)) · cos(2π·u₂)` from two
    /// uniform reals. Exactly two raw outputs, no second-value caching.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform_f64();
        let u2 = self.uniform_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
