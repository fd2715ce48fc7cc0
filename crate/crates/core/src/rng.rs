//! Deterministic RNG streams derived from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent stream `index` of the master seed. Streams depend only on
/// `(seed, index)`, so work split across any number of workers stays
/// reproducible.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed from a parent RNG, used when a routine needs to fan
/// out into indexed streams.
pub fn child_seed<R: rand::Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.gen()
}
