//! Deterministic per-stream seed derivation.
//!
//! Every trajectory, trial or anchor draw gets its own ChaCha stream derived
//! from `(root_seed, label, index)`, so batch results are independent of how
//! work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from a root seed, a purpose label and an index.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ hash_label(label)).wrapping_add(splitmix64(index)))
}

/// Opens the RNG stream for `(root, label, index)`.
pub fn stream(root: u64, label: &str, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, index))
}
