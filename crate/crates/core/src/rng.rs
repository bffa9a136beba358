//! Deterministic random streams.
//!
//! Every random consumer (a RACH run, a device's mobility, a slice's HARQ
//! draws, ...) gets its own ChaCha stream whose seed is a pure function of
//! the master seed and a path of labels. Streams never share state, so the
//! draws one component makes cannot perturb another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th per-seed stream of a campaign.
pub fn seed_stream(master_seed: u64, index: u64) -> u64 {
    derive(master_seed, &[0x5EED, index])
}

/// Folds `path` into `seed`.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn stream(seed: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive(seed, path))
}

/// Labels for the top level of the derivation path.
pub mod label {
    pub const CHANNEL: u64 = 1;
    pub const MOBILITY: u64 = 2;
    pub const TRAFFIC: u64 = 3;
    pub const HARQ: u64 = 4;
    pub const RACH: u64 = 5;
    pub const PLACEMENT: u64 = 6;
}
