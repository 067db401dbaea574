//! Seeded, portable random streams.
//!
//! Every random quantity in the planner comes from a [`DpRng`] derived from a
//! [`RandomSeed`] and a list of labels. The derivation hashes the seed and the
//! labels with SHA-256 and keys a ChaCha12 stream with the digest, so two call
//! sites with different labels never share a stream, and the same
//! `(seed, labels)` pair reproduces the same stream on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The generator used for all sampling.
pub type DpRng = ChaCha12Rng;

const DOMAIN: &[u8] = b"dp-planner/rng/v1";

/// Master seed for a family of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    pub fn new(seed: u64) -> Self {
        RandomSeed(seed)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// The root stream for this seed.
    pub fn rng(self) -> DpRng {
        self.derive(&["root"])
    }

    /// A stream keyed by `labels`.
    pub fn derive<L: AsRef<[u8]>>(self, labels: &[L]) -> DpRng {
        DpRng::from_seed(self.digest(labels))
    }

    /// A child seed keyed by `labels`, for handing to APIs that take a seed.
    pub fn child<L: AsRef<[u8]>>(self, labels: &[L]) -> RandomSeed {
        let d = self.digest(labels);
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&d[..8]);
        RandomSeed(u64::from_le_bytes(bytes))
    }

    /// Short public identifier for the seed. Does not reveal the seed.
    pub fn fingerprint(self) -> String {
        hex::encode(&self.digest(&["fingerprint"])[..8])
    }

    fn digest<L: AsRef<[u8]>>(self, labels: &[L]) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(DOMAIN);
        h.update(self.0.to_le_bytes());
        for label in labels {
            let bytes = label.as_ref();
            // length prefix keeps ["ab","c"] and ["a","bc"] apart
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        h.finalize().into()
    }
}

impl From<u64> for RandomSeed {
    fn from(seed: u64) -> Self {
        RandomSeed(seed)
    }
}
