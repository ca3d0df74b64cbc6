//! Seeded random streams.
//!
//! Every stochastic choice in a run draws from ChaCha8 (`rand_chacha` 0.9)
//! keyed by a 64-bit seed plus a stream id, so a trace is reproducible from its
//! config alone and independent of how node work is scheduled on threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids used by the engine. Node solver streams use the node id.
pub(crate) const DROPOUT_STREAM: u64 = u64::MAX;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
