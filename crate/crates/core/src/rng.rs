//! Seeded randomness. Every random draw in the crate comes from a
//! [`ChaCha8Rng`] built from an explicit 64-bit seed; child seeds are derived
//! from a parent seed and a purpose label so that independent streams never
//! share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// First 8 bytes of `SHA-256(seed_le || purpose)`.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derived_rng(seed: u64, purpose: &str) -> Rng {
    rng_from_seed(derive_seed(seed, purpose))
}
