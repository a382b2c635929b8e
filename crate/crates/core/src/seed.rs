//! Named random sub-streams derived from a single user seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from `base`, a stream name and an index.
///
/// SHA-256 keeps the mapping identical on every platform and toolchain.
pub fn derive(base: u64, stream: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((stream.len() as u64).to_le_bytes());
    h.update(stream.as_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

/// The portable generator used everywhere in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Short hex digest of an arbitrary config description.
pub fn fingerprint(text: &str) -> String {
    let out = Sha256::digest(text.as_bytes());
    out[..8].iter().map(|b| format!("{b:02x}")).collect()
}
