//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a parent seed and a fixed
//! label, so subsystems stay reproducible independently of each other and of
//! execution order. The derived seed is the first eight bytes (little endian)
//! of `SHA-256(parent_le_bytes || label)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from `parent` and a label string.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A `ChaCha8Rng` seeded directly from `seed`.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A `ChaCha8Rng` seeded from `derive_seed(parent, label)`.
pub fn labeled_rng(parent: u64, label: &str) -> ChaCha8Rng {
    seeded_rng(derive_seed(parent, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_stable_and_label_sensitive() {
        assert_eq!(derive_seed(7, "split"), derive_seed(7, "split"));
        assert_ne!(derive_seed(7, "split"), derive_seed(7, "folds"));
        assert_ne!(derive_seed(7, "split"), derive_seed(8, "split"));
    }

    #[test]
    fn labeled_rng_reproducible() {
        let a: Vec<u32> = (0..4)
            .map(|_| 0)
            .scan(labeled_rng(1, "x"), |r, _: u32| Some(r.random()))
            .collect();
        let b: Vec<u32> = (0..4)
            .map(|_| 0)
            .scan(labeled_rng(1, "x"), |r, _: u32| Some(r.random()))
            .collect();
        assert_eq!(a, b);
    }
}
