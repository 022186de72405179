//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit seed. Independent replicas use
//! separate ChaCha streams of the same seed, so results do not depend on how
//! replicas are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of `seed`; streams never overlap.
pub fn replica(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
