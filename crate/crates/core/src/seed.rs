//! Seed derivation for reproducible Monte Carlo runs.
//!
//! Every random stream is a ChaCha8 generator keyed by a 64-bit seed.
//! Per-trial seeds are derived from a base seed with [`derive`]:
//!
//! ```text
//! derive(base, stream, index) = splitmix64(base ^ splitmix64(stream << 32 ^ index))
//! ```
//!
//! `stream` separates independent uses inside one trial (arrivals, codebook,
//! noise, message choice) so that they never share a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used by the harness.
pub mod stream {
    pub const ARRIVALS: u64 = 1;
    pub const CODEBOOK: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const MESSAGE: u64 = 4;
    pub const SLOTS: u64 = 5;
}

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64((stream << 32) ^ index))
}
