//! Seeded random substreams.
//!
//! Every episode owns one seed. Independent consumers (graph sampling, reward
//! noise, algorithmic randomness, cluster-detection restarts) each draw from
//! their own ChaCha stream derived from that seed, so adding draws to one
//! consumer never shifts the values seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Graph = 1,
    Reward = 2,
    Algorithm = 3,
    Detection = 4,
}

/// Returns the substream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the `run`-th episode of a batch started from `master`.
pub fn run_seed(master: u64, run: u64) -> u64 {
    mix64(master ^ mix64(run))
}
