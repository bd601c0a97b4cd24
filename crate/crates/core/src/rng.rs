//! Labeled, seeded random streams.
//!
//! Every random draw in a plan comes from a stream derived from the plan seed
//! and a label, so adding a view or a phase never perturbs existing draws.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha20Rng;

/// Stream for `(seed, label)`; identical inputs give bit-identical output.
pub fn stream(seed: u64, label: &str) -> Stream {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}
