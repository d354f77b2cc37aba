//! Seed derivation. All randomness descends from one root seed; child
//! streams are keyed by a path of indices (subcommand, replication, period,
//! restart, ...) so any task can build its generator without coordination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `root` and a path of stream indices.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn stream(root: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(root, path))
}

/// Well-known stream tags.
pub mod tag {
    pub const SIMULATE: u64 = 1;
    pub const DETECT: u64 = 2;
    pub const BENCH: u64 = 3;
    pub const MEMBERSHIP_ROWS: u64 = 10;
    pub const MEMBERSHIP_COLS: u64 = 11;
    pub const DEGREES: u64 = 12;
    pub const COVARIATES: u64 = 13;
    pub const EDGES: u64 = 14;
    pub const KMEDIANS: u64 = 20;
}
