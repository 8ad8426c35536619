//! Per-component random streams derived from one root seed.
//!
//! A component's seed is `splitmix64(root ^ fnv1a64(name))`, and an indexed
//! sub-stream (one per ripple event, say) mixes the index in the same way.
//! Streams depend only on `(root, name, index)`, so adding a component
//! never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive_seed(root: u64, component: &str) -> u64 {
    splitmix64(root ^ fnv1a64(component.as_bytes()))
}

pub fn derive_indexed(root: u64, component: &str, index: u64) -> u64 {
    splitmix64(derive_seed(root, component) ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn component_rng(root: u64, component: &str) -> SimRng {
    rng_from_seed(derive_seed(root, component))
}
