//! Seeded, splittable random streams.
//!
//! Everything random in the crate draws from ChaCha8 keyed by a 64-bit seed.
//! Independent substreams (one per replicate, per method, per shard) use the
//! generator's stream counter, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub algorithm: RngAlgorithm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RngAlgorithm {
    ChaCha8,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            algorithm: RngAlgorithm::ChaCha8,
        }
    }

    /// The main stream (substream 0).
    pub fn rng(&self) -> StreamRng {
        self.substream(0)
    }

    pub fn substream(&self, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}
