//! Seeded, splittable randomness.
//!
//! Every randomized operation takes an explicit seed and derives its own
//! ChaCha stream from it. There is no global RNG state anywhere in the crate,
//! so any call is replay-identical given the same arguments.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent uses of the same user seed decorrelated.
pub mod stream {
    pub const SYNTH: u64 = 1;
    pub const FLIP_SELECT: u64 = 2;
    pub const FLIP_LABEL: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const BALANCE: u64 = 5;
    pub const REGRESSOR: u64 = 6;
    pub const ACTIVE: u64 = 7;
}

/// Deterministic generator for (`seed`, `stream`).
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `count` distinct indices below `n`, drawn uniformly without replacement
/// and returned in ascending order.
pub fn sample_indices(seed: u64, stream: u64, n: usize, count: usize) -> Vec<usize> {
    let mut ids: Vec<usize> =
        rand::seq::index::sample(&mut seeded(seed, stream), n, count.min(n)).into_vec();
    ids.sort_unstable();
    ids
}
