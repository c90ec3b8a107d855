//! Seed derivation for reproducible, order-independent parallel streams.
//!
//! Every parallel unit of work (bootstrap replication, simulation
//! replication, penalty draw) gets its own ChaCha stream derived from a
//! master seed and a stable index, so results do not depend on thread
//! scheduling or aggregation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche for mixing seed material.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a stream tag.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag))
}

/// An RNG for the stream identified by `(master, tag)`.
pub fn stream_rng(master: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag))
}
