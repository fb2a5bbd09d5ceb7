//! Seeded random streams.
//!
//! Every random decision draws from a stream keyed by
//! `(seed, epoch, phase, index)`, so per-particle work gives the same result
//! whether it runs in order or on separate workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Which step of an epoch a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Phase {
    Init = 1,
    Migrate = 2,
    Resample = 3,
    PairK = 4,
    CrossoverK = 5,
    MutateK = 6,
    PairR = 7,
    CrossoverR = 8,
    MutateR = 9,
    Baseline = 10,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent generator for one `(epoch, phase, index)` slot.
pub fn stream(seed: u64, epoch: u64, phase: Phase, index: u64) -> Rng {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ epoch);
    h = splitmix64(h ^ phase as u64);
    h = splitmix64(h ^ index);
    ChaCha8Rng::seed_from_u64(h)
}
