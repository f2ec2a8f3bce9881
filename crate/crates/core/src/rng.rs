//! Counter-based stream derivation.
//!
//! Every Monte Carlo consumer draws from a generator keyed by
//! `(seed, purpose, iteration, item)`, so results do not depend on how work
//! is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. Distinct purposes never share random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Primal radiance estimates inside a gradient pass.
    Radiance = 1,
    /// Independent paths for the adjoint (unbiased backpropagation).
    Adjoint = 2,
    /// Energy-only evaluation passes.
    Evaluate = 3,
    /// Test and utility sampling.
    Misc = 4,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, purpose: Purpose, iteration: u64, item: u64) -> StreamRng {
    let mut h = splitmix(seed);
    for k in [purpose as u64, iteration, item] {
        h = splitmix(h ^ k);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// A further-split stream, e.g. one per (face, light direction) pair, so
/// draws for one sub-item never shift those of another.
pub fn substream(seed: u64, purpose: Purpose, iteration: u64, item: u64, sub: u64) -> StreamRng {
    let mut h = splitmix(seed);
    for k in [purpose as u64, iteration, item, sub ^ 0xA5A5_0000_0000_0000] {
        h = splitmix(h ^ k);
    }
    ChaCha8Rng::seed_from_u64(h)
}
