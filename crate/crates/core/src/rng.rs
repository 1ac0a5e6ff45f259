//! Seed derivation. Every run owns one master seed from which independent
//! streams are split, so agents that consume different numbers of random
//! draws still see identical reward noise sequences for identical pulls.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const ENV_STREAM: u64 = 0;
const AGENT_STREAM: u64 = 1;

/// Stream used for reward noise.
pub fn env_rng(seed: u64) -> SimRng {
    stream(seed, ENV_STREAM)
}

/// Stream used for the agent's own randomness (exploration, posterior sampling).
pub fn agent_rng(seed: u64) -> SimRng {
    stream(seed, AGENT_STREAM)
}

pub fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
