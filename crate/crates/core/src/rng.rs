//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit `u64` seed. Independent
//! sub-streams (one per Monte Carlo trial, sweep cell, segment...) are
//! derived by hashing the parent seed with a path of integer tags, so the
//! draws of a trial do not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a path of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ mix(t)))
}

/// A ChaCha8 stream for `seed` / `tags`.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

// Tags used to keep independent purposes on separate streams.
pub(crate) const TAG_NOISE: u64 = 1;
pub(crate) const TAG_INTERFERENCE: u64 = 2;
pub(crate) const TAG_NUISANCE: u64 = 3;
pub(crate) const TAG_GUESS: u64 = 4;
pub(crate) const TAG_TRIAL: u64 = 5;
