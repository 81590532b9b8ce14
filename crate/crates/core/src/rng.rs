//! Reproducible random streams.
//!
//! A [`RandomStream`] is a `(seed, stream_index)` pair. The generator behind
//! it is ChaCha8 keyed by the seed with the stream index selecting one of its
//! 2^64 independent counter streams, so outputs depend only on the pair and
//! never on which worker consumes the stream or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// Root stream for a seed.
    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Derives a child stream. Children of distinct parents or with distinct
    /// indices land on distinct stream indices (up to 64-bit hash collisions).
    pub fn child(&self, index: u64) -> Self {
        let mixed = splitmix64(splitmix64(self.stream_index) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03));
        Self::new(self.seed, mixed)
    }

    /// Instantiates the generator for this stream at counter zero.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
