//! Root-seed plumbing.
//!
//! Every stochastic stage draws from a named substream derived from one root
//! seed, so stages can be reproduced independently of each other (changing
//! the network init does not shift the dataset noise, and so on). ChaCha is
//! used everywhere instead of `StdRng` because its stream is stable across
//! library versions and platforms, which the byte-reproducibility contracts
//! rely on.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Substream used for synthetic measurement noise.
pub const STREAM_DATA: &str = "data";
/// Substream used for network parameter initialization.
pub const STREAM_INIT: &str = "init";
/// Substream used for the train/val/test shuffle.
pub const STREAM_SPLIT: &str = "split";
/// Substream used by hyperparameter search.
pub const STREAM_SEARCH: &str = "search";

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the named substream under `root`.
pub fn substream(root: u64, name: &str) -> u64 {
    splitmix64(root ^ fnv1a64(name.as_bytes()))
}

/// Seed of the `index`-th member of a named substream family (per-trial,
/// per-iteration streams).
pub fn substream_indexed(root: u64, name: &str, index: u64) -> u64 {
    splitmix64(substream(root, name) ^ splitmix64(index))
}

/// Deterministic RNG for the named substream.
pub fn rng(root: u64, name: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(substream(root, name))
}

/// Deterministic RNG for the indexed substream.
pub fn rng_indexed(root: u64, name: &str, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(substream_indexed(root, name, index))
}
