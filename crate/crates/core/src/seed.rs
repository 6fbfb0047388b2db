//! Counter-based seed derivation.
//!
//! Every random stream in a run is keyed by `(master seed, purpose, indices…)`
//! so that runs are independent of each other and of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const DROPOUT: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const LABELS: u64 = 4;
    pub const MODEL: u64 = 5;
    pub const TRAIN: u64 = 6;
    pub const HOLDOUT: u64 = 7;
    pub const SYNTHETIC: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
