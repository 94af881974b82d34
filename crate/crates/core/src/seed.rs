//! Deterministic seeding.
//!
//! Every random draw in the crate goes through [`rng`], which is ChaCha8
//! seeded from a `u64`. Per-item streams (test points, Monte-Carlo trials,
//! smoothing draws) are derived with [`mix`] so that results do not depend on
//! evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Combine a base seed with an index (splitmix64 finalizer).
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from the bit pattern of a point.
pub fn mix_point(seed: u64, x: &[f64]) -> u64 {
    x.iter().fold(mix(seed, x.len() as u64), |acc, v| mix(acc, v.to_bits()))
}
