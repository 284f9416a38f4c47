//! Counter-based seed streams.
//!
//! Every random draw in a run is keyed by `(master seed, trial, purpose)` so trials can be
//! executed in any order or in parallel and still produce the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Matrix = 1,
    InitMatrix = 2,
    Trajectory = 3,
    Noise = 4,
    InitNoise = 5,
}

pub fn stream(master: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((trial << 8) | purpose as u64);
    rng
}

/// Plain seeded generator for single-shot operations (matrix generation, tests).
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
