//! Deterministic random streams.
//!
//! Every random quantity in a simulation is drawn from its own ChaCha stream
//! whose seed is a hash of the experiment seed and a tuple of identifying
//! tags (domain, run, step, node ids). Results therefore do not depend on
//! evaluation order or on how runs are spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_GEOMETRY: u64 = 0x6765_6f6d;
pub const DOMAIN_SHADOWING: u64 = 0x7368_6164;
pub const DOMAIN_STEP: u64 = 0x7374_6570;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}
