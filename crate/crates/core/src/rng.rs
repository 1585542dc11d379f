//! Per-stream deterministic random number generators.
//!
//! Every random decision in a run draws from a stream keyed by
//! `(global seed, entity id, purpose)`. Streams are independent of each other,
//! so adding a virtual link never perturbs the draws of another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the stream key and
/// must stay stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    FrameLength = 1,
    CorruptionA = 2,
    CorruptionB = 3,
    DepartureJitter = 4,
    Topology = 5,
}

/// Derives the generator for one stream.
pub fn stream(global_seed: u64, entity: u64, purpose: Purpose) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(b"avionet-stream-v1");
    hasher.update(global_seed.to_le_bytes());
    hasher.update(entity.to_le_bytes());
    hasher.update([purpose as u8]);
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
