//! Reproducible random streams.
//!
//! Every chain and every simulation replicate owns a ChaCha generator keyed by
//! `(seed, stream)`. ChaCha is counter based, so distinct streams are
//! independent and a given key always yields the same sequence regardless of
//! which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream identifiers for the parts of a simulation study. Replicates are
/// spaced far enough apart that no two (replicate, role) pairs collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Data,
    Fit(u32),
    Chain(u32),
}

pub fn stream_id(replicate: u64, role: StreamRole) -> u64 {
    let offset = match role {
        StreamRole::Data => 0,
        StreamRole::Fit(k) => 1 + u64::from(k),
        StreamRole::Chain(k) => (1 << 16) + u64::from(k),
    };
    (replicate << 32) | offset
}
