//! Reproducible randomness: one master seed, named sub-streams.
//!
//! Every random decision in the pipeline draws from a `ChaCha8Rng` derived
//! from `(master_seed, stream_name)`, so components can be re-run in
//! isolation and still reproduce the exact numbers of a full run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a deterministic RNG for a named sub-stream of `master`.
///
/// The derivation hashes the seed and the name, so streams like
/// `"generator"`, `"contrast"`, `"eval"`, `"view:17"` are independent
/// regardless of the master seed value.
pub fn stream(master: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Sub-stream of a sub-stream, e.g. per-graph view streams.
pub fn substream(master: u64, name: &str, index: u64) -> ChaCha8Rng {
    stream(master, &format!("{name}:{index}"))
}
