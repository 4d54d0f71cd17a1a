//! Positional seed derivation.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose seed is a
//! pure function of its position: (base seed, config, run) for a run,
//! (run, step) for a frame, and (frame, unit, object) below that. Adding
//! a config, unit or object never shifts anyone else's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`, order-sensitively.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

/// Seed for run `run_index` of config `config_index`.
pub fn run_seed(base_seed: u64, config_index: usize, run_index: usize) -> u64 {
    derive_seed(base_seed, &[config_index as u64, run_index as u64])
}

/// Source of independent random substreams for one perception frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameStreams {
    key: u64,
}

const DETECTION_TAG: u64 = 0xD7;
const SAMPLING_TAG: u64 = 0x5A;

impl FrameStreams {
    pub fn new(key: u64) -> Self {
        Self { key }
    }

    /// Streams for step `step` of the run seeded with `run_seed`.
    pub fn for_step(run_seed: u64, step: u64) -> Self {
        Self::new(derive_seed(run_seed, &[step]))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Stream for unit `unit_id`'s detection draws on object `object_id`.
    pub fn detection(&self, unit_id: usize, object_id: u64) -> SimRng {
        SimRng::seed_from_u64(derive_seed(
            self.key,
            &[DETECTION_TAG, unit_id as u64, object_id],
        ))
    }

    /// Stream for the error sample of object `object_id`.
    pub fn sampling(&self, object_id: u64) -> SimRng {
        SimRng::seed_from_u64(derive_seed(self.key, &[SAMPLING_TAG, object_id]))
    }
}
