//! Counter-based generator streams.
//!
//! Every path (or particle within a splitting stage) draws from its own ChaCha
//! stream selected by `(key, index)`, so outcomes depend only on the master
//! seed and the index, never on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Key of a sub-experiment (e.g. a splitting stage) derived from the master
/// seed.
pub fn derive_key(master_seed: u64, domain: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(domain.wrapping_add(1)))
}

/// Generator for stream `index` under `key`.
pub fn stream(key: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
