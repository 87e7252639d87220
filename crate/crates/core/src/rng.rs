//! Named, independently seeded random streams.
//!
//! Every stochastic component of a run owns its own stream derived from the
//! run's master seed and a stable name, so adding draws in one component
//! never shifts the numbers another component sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derive a 64-bit seed from a master seed and a stream name.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(master: u64, name: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(master, name))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
