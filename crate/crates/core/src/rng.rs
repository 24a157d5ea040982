//! Seeded, splittable random streams.
//!
//! Every randomized routine derives its generator from a `(seed, stream)`
//! pair, so trial `i` of a run is reproducible on its own and independent of
//! the order trials are executed in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under the root `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from `[lo, hi)`; returns `lo` for an empty interval.
pub fn uniform_in(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform index in `0..n`.
pub fn index(rng: &mut StreamRng, n: usize) -> usize {
    rng.random_range(0..n)
}
