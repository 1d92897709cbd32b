//! Deterministic randomness.
//!
//! Every random draw in the crate comes from a ChaCha8 substream addressed by
//! `(master_seed, stream label, index)`. The label occupies the top byte of the
//! 64-bit ChaCha stream id and the index the remaining 56 bits, so distinct
//! triples never share keystream. Work split across threads therefore always
//! sees the same numbers no matter the scheduling order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Stream {
    Splitting = 1,
    CvFolds = 2,
    SimulationNoise = 3,
    BetaSampling = 4,
    Design = 5,
    /// Derives child seeds (one per simulation replicate).
    Replicate = 6,
    /// Forced random screening used in null calibration runs.
    RandomScreen = 7,
}

const INDEX_BITS: u32 = 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64) -> Self {
        RngSpec { master_seed }
    }

    pub fn substream(&self, stream: Stream, index: u64) -> ChaCha8Rng {
        assert!(index < (1 << INDEX_BITS), "substream index out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(((stream as u64) << INDEX_BITS) | index);
        rng
    }

    /// Independent spec for the `index`-th replicate of an experiment.
    pub fn child(&self, index: u64) -> RngSpec {
        RngSpec::new(self.substream(Stream::Replicate, index).next_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_triple_same_numbers() {
        let spec = RngSpec::new(42);
        let a: Vec<u64> = (0..8).map(|_| spec.substream(Stream::Splitting, 3).random()).collect();
        let mut r = spec.substream(Stream::Splitting, 3);
        let first: u64 = r.random();
        assert_eq!(a[0], first);
    }

    #[test]
    fn distinct_labels_and_indices_differ() {
        let spec = RngSpec::new(7);
        let mut seen = std::collections::HashSet::new();
        for s in [Stream::Splitting, Stream::CvFolds, Stream::SimulationNoise, Stream::BetaSampling] {
            for i in 0..50 {
                let v: u64 = spec.substream(s, i).random();
                assert!(seen.insert(v));
            }
        }
        assert_ne!(spec.child(0), spec.child(1));
        assert_ne!(RngSpec::new(8).child(0), spec.child(0));
    }
}
