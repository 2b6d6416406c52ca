//! Seeded random streams. Every stochastic step draws from its own ChaCha8
//! stream of the run seed, so changing how much one step consumes never shifts
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Centroids = 1,
    ClusterNoise = 2,
    Mixing = 3,
    Flips = 4,
    Shuffle = 5,
    Init = 6,
    Batches = 7,
    Baseline = 8,
    Perturb = 9,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Stream for the `index`-th independent draw sequence of one purpose, e.g.
/// one noise realization.
pub fn indexed_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | (index & 0xffff_ffff));
    rng
}
