//! Deterministic random streams.
//!
//! Every consumer of randomness asks for a stream by `(seed, label)`. The
//! label names the consumer (a grid cell, an epoch, an example index), so two
//! streams never depend on the order in which workers happen to run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Open the stream identified by `(seed, label)`.
pub fn seeded_rng(seed: u64, label: &str) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Derive a child seed from a parent seed and a label, for handing to
/// components that take a plain `u64` (model initialisation, for instance).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    seeded_rng(seed, label).next_u64()
}
