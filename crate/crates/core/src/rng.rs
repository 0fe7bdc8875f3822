//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, stream, lane)`: the seed keys a
//! ChaCha8 generator, the stream selects the ChaCha nonce and the lane selects
//! the word offset inside that stream. Coefficient `k` of a sample reads from
//! stream `k`, so prefixes are stable and parallel generation is deterministic.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

/// Stream reserved for per-sample (not per-index) draws such as a mixture branch.
pub const SAMPLE_STREAM: u64 = u64::MAX;

#[derive(Clone)]
pub struct CounterRng {
    keyed: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { keyed: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn bits(&self, stream: u64, lane: u64) -> u64 {
        let mut rng = self.keyed.clone();
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(lane) * 2);
        rng.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&self, stream: u64, lane: u64) -> f64 {
        ((self.bits(stream, lane) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inverse CDF, one uniform per draw.
    pub fn standard_normal(&self, stream: u64, lane: u64) -> f64 {
        normal_quantile(self.uniform(stream, lane))
    }
}

/// `Phi^{-1}(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}
