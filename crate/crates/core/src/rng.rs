//! Seed derivation and stream construction.
//!
//! Every random decision in the crate flows from a `u64` seed through
//! [`derive_seed`] into its own ChaCha8 stream, so independent workers never
//! share PRNG state and any run can be replayed from its master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step. Used purely as a mixing function for seed derivation.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a sequence of labels.
///
/// Distinct label sequences map to distinct streams with overwhelming
/// probability; the derivation is pure and platform-independent.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    let mut state = splitmix64(seed);
    for &label in labels {
        state = splitmix64(state ^ splitmix64(label));
    }
    state
}

/// A fresh ChaCha8 stream for the given seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
