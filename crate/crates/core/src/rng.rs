//! Named random substreams derived from one episode seed.
//!
//! Each consumer draws from its own ChaCha stream so that changing how many
//! numbers one consumer pulls never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenario = 0,
    Wind = 1,
    Targets = 2,
    Perception = 3,
    Planner = 4,
    Dataset = 5,
    Spawn = 6,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
