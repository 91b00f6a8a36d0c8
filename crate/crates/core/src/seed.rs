//! Seeded random streams. Every consumer of randomness draws from its own
//! ChaCha stream keyed by `(seed, purpose)`, so adding draws in one place
//! never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Distinct purposes that draw randomness from an experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Contamination = 1,
    TaskSplit = 2,
    Stream = 3,
    ModelInit = 4,
    Training = 5,
    Surrogate = 6,
}

pub fn rng_for(seed: u64, purpose: Purpose) -> Rng {
    rng_for_index(seed, purpose, 0)
}

/// Stream for the `index`-th use of a purpose (for example one stream per task).
pub fn rng_for_index(seed: u64, purpose: Purpose, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | (index & 0xffff_ffff));
    rng
}

/// A derived 64-bit seed, for APIs that take a plain integer.
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    rng_for_index(seed, purpose, index).next_u64()
}
