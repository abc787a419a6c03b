//! Seeded random streams. Every random draw in the crate comes from a stream
//! derived from an explicit seed, a domain tag and an index, never from the clock.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod domain {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const CARVE: u64 = 4;
    pub const CORPUS: u64 = 5;
    pub const VECTORS: u64 = 6;
    pub const OOV: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ domain) ^ index);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// 64-bit FNV-1a, used to key per-word streams.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
