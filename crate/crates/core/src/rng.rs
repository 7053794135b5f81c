//! Deterministic seed derivation.
//!
//! All randomness in the pipeline flows from a single user seed through named
//! sub-streams (`"data"`, `"bank"`, `"train"`, ...) and per-item indices, so
//! that every artifact is reproducible bit-for-bit and independent stages do
//! not share RNG state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; a cheap, well-mixed 64-bit permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of a named sub-stream from a global seed.
pub fn substream(seed: u64, name: &str) -> u64 {
    let mut h = splitmix64(seed);
    for &b in name.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

/// Derives a per-item seed from a stream seed, e.g. one per trajectory.
pub fn indexed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// The RNG used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
