//! Seeded, splittable randomness.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a base
//! seed and selected by a path of indices (model, sequence, trial, ...), so
//! parallel work is reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Fold a path of indices into one 64-bit value.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(1))))
}

/// Independent generator for the given path under `seed`.
pub fn substream(seed: u64, path: &[u64]) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(derive(seed, path));
    rng
}
