//! Seed derivation.
//!
//! Every random consumer (a data stream, a bootstrap chain, one Brownian
//! path) gets its own ChaCha8 generator keyed by `(master seed, path of
//! u64 labels)`. Derivation is a pure function of its inputs, so work can be
//! scheduled on any number of threads and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Labels for the independent sub-streams of one repetition.
pub mod label {
    pub const DATA: u64 = 1;
    pub const PROBLEM: u64 = 2;
    pub const MULTIPLIER: u64 = 3;
    pub const BROWNIAN: u64 = 4;
    pub const REPETITION: u64 = 5;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a label path into a 64-bit seed. Order matters: `[1, 2] != [2, 1]`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn derive_rng(master: u64, path: &[u64]) -> SimRng {
    let s = derive_seed(master, path);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(s.wrapping_add(i as u64)).to_le_bytes());
    }
    SimRng::from_seed(key)
}
