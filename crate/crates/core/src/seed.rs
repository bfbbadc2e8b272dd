//! Seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded through
//! [`ChaCha8Rng::seed_from_u64`]. Child seeds are derived from a parent seed and
//! a path of indices by folding each index through the SplitMix64 finalizer:
//!
//! ```text
//! h = splitmix64(parent)
//! h = splitmix64(h ^ splitmix64(index_k))   for each index in the path
//! ```
//!
//! so a realization of a sweep can be replayed from
//! `derive(master, &[point_index, realization_index])` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One step of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and an index path.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |h, &i| splitmix64(h ^ splitmix64(i)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
