//! Seeded random streams.
//!
//! All randomness in the crate comes from SplitMix64 (Steele, Lea & Flood):
//! the state advances by `0x9E3779B97F4A7C15` and each output is the state
//! passed through the fixed xor-shift/multiply finalizer. Uniform doubles
//! take the top 53 bits of an output, so a seed yields the same values on
//! every platform.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

pub type SeedRng = rand_xoshiro::SplitMix64;

pub fn seeded(seed: u64) -> SeedRng {
    SeedRng::seed_from_u64(seed)
}

/// Uniform in `[0, 1)` from the top 53 bits of the next output.
pub fn unit(rng: &mut SeedRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `[lo, hi)`.
pub fn uniform(rng: &mut SeedRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

pub fn normal(rng: &mut SeedRng) -> f64 {
    StandardNormal.sample(rng)
}
