//! Portable seeded index draws for the search.
//!
//! The stream is ChaCha8 keyed by the 64-bit seed; every draw is an unbiased
//! bounded integer built from `next_u64` by Lemire's multiply-and-reject, so
//! the sequence depends only on the seed and the bounds requested.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SearchRng {
    inner: ChaCha8Rng,
}

impl SearchRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform integer in `0..n`. Panics on `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot draw from an empty range");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.inner.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            p.swap(i, j);
        }
        p
    }
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SearchRng::new(42);
        let mut b = SearchRng::new(42);
        let xs: Vec<usize> = (0..50).map(|k| a.index(k % 7 + 1)).collect();
        let ys: Vec<usize> = (0..50).map(|k| b.index(k % 7 + 1)).collect();
        assert_eq!(xs, ys);
        assert!(xs.iter().enumerate().all(|(k, &v)| v < k % 7 + 1));
    }

    #[test]
    fn roughly_uniform() {
        let mut r = SearchRng::new(1);
        let mut counts = [0usize; 5];
        for _ in 0..50_000 {
            counts[r.index(5)] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0);
        }
    }

    #[test]
    fn permutation_is_bijective() {
        let mut p = SearchRng::new(9).permutation(31);
        p.sort();
        assert_eq!(p, (0..31).collect::<Vec<_>>());
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
    }
}
