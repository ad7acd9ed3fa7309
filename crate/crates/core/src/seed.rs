//! Seed derivation.
//!
//! Component seeds are the first eight bytes (little endian) of
//! `SHA-256(master.to_le_bytes() || label)`. The runner uses the labels
//! `"oracle"`, `"proposer"` and `"acceptance"`. Per-evaluation seeds for the
//! synthetic oracle hash the oracle seed, the game budget and the serialized
//! assignment in the same way.

use sha2::{Digest, Sha256};

use crate::perm::Assignment;

pub const ORACLE: &str = "oracle";
pub const PROPOSER: &str = "proposer";
pub const ACCEPTANCE: &str = "acceptance";

fn first_u64(bytes: &[u8]) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&bytes[..8]);
    u64::from_le_bytes(b)
}

pub fn derive(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    first_u64(&h.finalize())
}

/// Seed for one evaluation of `x` at a given budget.
pub fn for_evaluation(seed: u64, x: &Assignment, n_games: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(n_games.to_le_bytes());
    h.update(x.to_string().as_bytes());
    first_u64(&h.finalize())
}

/// Seed for chunk `index` of a sample batch.
pub fn for_chunk(base: u64, index: u64) -> u64 {
    derive(base, &format!("chunk-{index}"))
}
