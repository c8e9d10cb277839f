//! Deterministic derivation of independent RNG streams from a single run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere a reproducible random stream is needed.
pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` for the stream named by `tag` and `index`.
pub fn derive(base: u64, tag: u64, index: u64) -> u64 {
    mix(mix(base ^ mix(tag)).wrapping_add(index))
}

pub fn rng(base: u64, tag: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive(base, tag, index))
}

// Stream tags.
pub const TAG_TRAIN_ENV: u64 = 1;
pub const TAG_EVAL_ENV: u64 = 2;
pub const TAG_HEAD_INIT: u64 = 3;
pub const TAG_AGENT: u64 = 4;
pub const TAG_MASK: u64 = 5;
pub const TAG_BASELINE: u64 = 6;
