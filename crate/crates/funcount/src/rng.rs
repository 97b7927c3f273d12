//! Seeding scheme used throughout the crate.
//!
//! All randomness derives from one `u64` seed. Independent streams come from
//! ChaCha8's stream parameter, so per-subject draws are reproducible no
//! matter how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed for a named pipeline stage, so stages draw from
/// disjoint streams even when they create their own generators.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
        h ^= h >> 29;
    }
    h
}
