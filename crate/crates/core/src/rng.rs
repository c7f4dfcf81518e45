//! Label-keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose 32-byte seed is
//! `SHA-256(master_seed as little-endian u64 || label bytes)`. Experiments name
//! their streams (`phi/7`, `z/7`, `u/7`, `spinit/7/123`, ...) so a single
//! component can be re-drawn or swapped without disturbing the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Streams { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    fn digest(&self, label: &str) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update(label.as_bytes());
        hasher.finalize().into()
    }

    pub fn stream(&self, label: &str) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest(label))
    }

    /// A 64-bit seed derived from `label`, for components that seed their own generator.
    pub fn seed(&self, label: &str) -> u64 {
        let d = self.digest(label);
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    /// A child family whose labels are prefixed with `prefix/`.
    pub fn child(&self, prefix: &str) -> Streams {
        Streams {
            master: self.seed(prefix),
        }
    }
}
