//! Deterministic derivation of independent random streams from a master
//! seed and a path of integer tags (set id, replica index, purpose, ...).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_for(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

/// Stream purposes, used as the first tag.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const ANGLES: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const REPLICA: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const MULTISTART: u64 = 6;
    pub const SPREAD: u64 = 7;
    pub const DROPOUT: u64 = 8;
}
