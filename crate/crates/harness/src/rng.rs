//! Reproducible random streams.
//!
//! Every stochastic ingredient draws from its own ChaCha8 stream: the key comes from the
//! experiment seed and the stream id names the ingredient, so adding draws to one
//! ingredient never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    InitialData = 1,
    Perturbation = 2,
}

pub fn stream(seed: u64, id: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}
