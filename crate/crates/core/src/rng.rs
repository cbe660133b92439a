//! Seeded random streams.
//!
//! Every consumer derives its own stream from `(master seed, tag)` so that
//! results do not depend on the order in which samples are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for `tag` under `seed`.
pub fn derive(seed: u64, tag: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(tag));
    rng
}

/// Child seed for `tag`, for APIs that take a plain integer seed.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    use rand::RngCore;
    derive(seed, tag).next_u64()
}
