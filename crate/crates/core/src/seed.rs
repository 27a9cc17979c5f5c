//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by the master seed and a path of
//! integers (task, trajectory index, purpose). Keys are mixed with SplitMix64
//! so sibling streams are decorrelated and independent of worker scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream purposes, used as the last path component.
pub mod stream {
    pub const TRACE: u64 = 0x7472_6163;
    pub const POLICY: u64 = 0x706f_6c69;
    pub const PERTURB: u64 = 0x7065_7274;
    pub const STATS: u64 = 0x7374_6174;
    pub const EVAL: u64 = 0x6576_616c;
    pub const TRAIN: u64 = 0x7472_6e67;
    pub const VALID: u64 = 0x7661_6c69;
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

pub fn rng_for(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}
