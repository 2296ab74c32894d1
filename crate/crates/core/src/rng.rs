//! Deterministic random streams.
//!
//! Every stochastic routine draws from a ChaCha8 generator keyed by
//! `(seed, stream)`. ChaCha is counter based, so two streams with the same
//! seed never overlap and a parallel trial `i` always sees the same numbers
//! regardless of which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream indices used by the library. Distinct purposes never share a stream.
pub mod streams {
    pub const POINTS: u64 = 0;
    pub const MC_TILES: u64 = 1 << 32;
    pub const PAIR_SAMPLING: u64 = 2 << 32;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
