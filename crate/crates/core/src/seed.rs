//! Seed fan-out.
//!
//! Every random stream in the crate is derived from a single master seed,
//! either by label (`"split"`, `"model:gbdt"`, ...) or by counter (tree index,
//! boosting iteration). Derived streams never depend on how many other
//! streams were drawn before them, which is what makes parallel training and
//! warm-started boosting reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sub-seed for a named component.
pub fn derive(master: u64, label: &str) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(label)))
}

/// Sub-seed for the `index`-th member of a family (tree, iteration, day).
pub fn derive_indexed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master).wrapping_add(splitmix64(index.wrapping_add(1))))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
