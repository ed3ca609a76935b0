//! Seed derivation.
//!
//! Every experiment takes a single master seed. Independent randomness
//! consumers draw from named sub-streams (`datagen`, `init`, `noise`, ...),
//! and per-item seeds are derived from a stream seed and an index, so any
//! one consumer can be reproduced without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const DATAGEN: &str = "datagen";
pub const INIT: &str = "init";
pub const NOISE: &str = "noise";

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of the named sub-stream of `master`.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    splitmix64(master ^ fnv1a(name))
}

/// Seed of item `index` within a stream.
pub fn item_seed(stream: u64, index: u64) -> u64 {
    splitmix64(stream.wrapping_add(splitmix64(index)))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
