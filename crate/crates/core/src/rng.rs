//! Seeded randomness.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` seeded through
//! [`rng_for`]. Sub-seeds are derived from a base seed and a path of indices
//! with the SplitMix64 finalizer, so parallel work can be split by index
//! without sharing generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for `(base, path[0], path[1], ...)`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(base: u64, path: &[u64]) -> Rng {
    rng_from_seed(derive_seed(base, path))
}

/// Stream tags so that different consumers of one user seed never collide.
pub(crate) mod stream {
    pub const UPSAMPLE: u64 = 0x7570;
    pub const AUGMENT: u64 = 0x6175;
    pub const TRAIN: u64 = 0x7472;
    pub const INIT: u64 = 0x696e;
    pub const CONDCONF: u64 = 0x6363;
    pub const SWEEP: u64 = 0x7377;
    pub const SALIENCY: u64 = 0x736c;
    pub const SYNTH: u64 = 0x7379;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derivation_is_deterministic_and_path_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
        assert_ne!(derive_seed(7, &[]), derive_seed(7, &[0]));
        let a: u64 = rng_for(3, &[4]).random();
        let b: u64 = rng_for(3, &[4]).random();
        assert_eq!(a, b);
    }
}
