//! Seeded randomness: one root seed, many independent deterministic streams.
//!
//! Every stochastic choice in the simulator draws from a stream derived from
//! the run seed, a short domain label, and an index (device id, transfer
//! sequence number, epoch, …). Streams are stable across refactorings as long
//! as their (domain, index) pair is stable, which is what makes whole runs
//! reproducible bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(not(feature = "std"))]
use crate::fmath::F64Ext;

/// Returns the deterministic generator used everywhere in this crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer; a cheap, well-mixed 64-bit permutation.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// FNV-1a hash of the domain label.
fn domain_hash(domain: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in domain.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from `(seed, domain, index)`.
///
/// This is stream separation, not cryptography: distinct domains and indices
/// land in distinct, statistically independent ChaCha streams.
pub fn derive_seed(seed: u64, domain: &str, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(domain_hash(domain).wrapping_add(splitmix64(index))))
}

/// Returns the generator for the `(domain, index)` sub-stream of `seed`.
pub fn stream(seed: u64, domain: &str, index: u64) -> ChaCha8Rng {
    seeded_rng(derive_seed(seed, domain, index))
}

/// Standard normal sample via the Box–Muller transform.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // 1 - U in (0, 1] keeps the logarithm finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
}

/// Exponential sample with the given rate, by inverse CDF.
pub fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    debug_assert!(rate > 0.0);
    let u: f64 = rng.gen(); // in [0, 1)
    -(1.0 - u).ln() / rate
}
