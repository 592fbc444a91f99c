//! Seed derivation for replayable experiments.
//!
//! Every random choice in the crate comes from a [`ChaCha8Rng`] seeded with a
//! 64-bit value. Sub-tasks (one trial, one candidate, one instance) get their
//! own seed derived from the master seed and the task coordinates, so the
//! schedule a worker pool picks never changes the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in result metadata so runs can be replayed elsewhere.
pub const PRNG_ALGORITHM: &str = "chacha8-rand0.8/splitmix64-derive";

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `master` with a path of task coordinates.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Stable 64-bit FNV-1a hash, used to turn instance ids into seed coordinates.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
