//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream derived
//! from the run seed and a short path of integers (a domain tag followed by
//! party and round indices). Child seeds are obtained by folding the path
//! through SplitMix64, so a stream depends only on its path and never on the
//! order in which other streams were used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags for the stream path.
pub mod domain {
    pub const PARTY_TRUTH: u64 = 1;
    pub const SAMPLE_COUNTS: u64 = 2;
    pub const PARTY_SELECTION: u64 = 3;
    pub const LOCAL_SOLVE: u64 = 4;
    pub const INIT: u64 = 5;
    pub const QUADRATIC_CENTERS: u64 = 6;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit seed of the child stream at `path` under `seed`.
pub fn child_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(child_seed(seed, path))
}
