//! Seed derivation. Every random draw in the crate flows from a `u64` seed
//! through these helpers so runs are reproducible across machines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named seed streams. Training and test draws use disjoint streams so test-time
/// Monte Carlo averaging never reuses a training sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    TrainSamples = 1,
    TestSamples = 2,
    ValSamples = 3,
    ModelInit = 4,
    Task = 5,
    Diagnostics = 6,
    Cgnn = 7,
    Run = 8,
    Minibatch = 9,
}

/// Deterministically derives the `index`-th seed of `stream` under `base`.
pub fn derive(base: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(stream as u64)).wrapping_add(index))
}
