//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha8 stream keyed by a 64-bit
//! seed and a stream id, so a run is reproducible from `(seed, config)` and
//! independent runs never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids that keep the independent consumers of one seed apart.
pub mod stream {
    pub const SPLITS: u64 = 1;
    pub const INIT: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const SYNTH_EDGES: u64 = 4;
    pub const SYNTH_FEATURES: u64 = 5;
    pub const SEARCH: u64 = 6;
    pub const GRAD_CHECK: u64 = 7;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream derived from a base seed and a sub-index (split id, trial id, ...).
pub fn derived(seed: u64, stream: u64, index: u64) -> Rng {
    let mixed = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    seeded(mixed, stream)
}
