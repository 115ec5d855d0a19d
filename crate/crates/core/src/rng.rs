//! Seeded, platform-independent shuffling.
//!
//! Every random choice in the dataset pipeline goes through [`SeededShuffler`]
//! so that a `(input, seed)` pair always yields the same output. The stream is
//! ChaCha8 seeded via `seed_from_u64`; index draws use rejection sampling on
//! raw `u64` output rather than `rand`'s range helpers, whose exact value
//! sequence is not guaranteed across releases.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct SeededShuffler {
    rng: ChaCha8Rng,
}

impl SeededShuffler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform integer in `0..bound`. `bound` must be nonzero.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // reject the top partial bucket so every residue is equally likely
        let zone = u64::MAX - (u64::MAX % bound + 1) % bound;
        loop {
            let x = self.rng.next_u64();
            if x <= zone {
                return x % bound;
            }
        }
    }

    /// Fisher-Yates, drawing from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Derives an independent sub-seed, e.g. one per mixing source.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_permutation() {
        let mut a: Vec<u32> = (0..100).collect();
        let mut b = a.clone();
        SeededShuffler::new(7).shuffle(&mut a);
        SeededShuffler::new(7).shuffle(&mut b);
        assert_eq!(a, b);
        let mut c: Vec<u32> = (0..100).collect();
        SeededShuffler::new(8).shuffle(&mut c);
        assert_ne!(a, c);
        a.sort();
        assert_eq!(a, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn below_stays_in_bounds() {
        let mut s = SeededShuffler::new(1);
        for bound in [1u64, 2, 3, 7, 1000, u64::MAX] {
            for _ in 0..100 {
                assert!(s.below(bound) < bound);
            }
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(42, 0), derive_seed(42, 1));
        assert_eq!(derive_seed(42, 3), derive_seed(42, 3));
    }
}
