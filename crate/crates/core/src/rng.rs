//! Seeded random draws for banks and test signals.
//!
//! Everything random in the crate comes from SplitMix64. A coefficient is +1
//! iff the top bit of the next 64-bit draw is set.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Seed used when the caller does not provide one.
pub const DEFAULT_SEED: u64 = 50;

/// Deterministic coefficient and sample source.
#[derive(Debug, Clone)]
pub struct BankRng(SplitMix64);

impl BankRng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    /// Generator for the `index`-th independent stream derived from `seed`.
    ///
    /// Streams depend only on `(seed, index)`, so work split across threads
    /// gives the same result as a serial loop.
    pub fn stream(seed: u64, index: u64) -> Self {
        let mut root = SplitMix64::seed_from_u64(seed ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03));
        Self::new(root.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn coefficient(&mut self) -> i8 {
        if self.next_u64() >> 63 == 1 {
            1
        } else {
            -1
        }
    }

    /// Uniform sample with `|s| < 2^(width-1)`.
    pub fn sample(&mut self, width: u32) -> i64 {
        debug_assert!((1..=63).contains(&width));
        let span = 1u64 << width;
        let half = (span >> 1) as i64;
        // Symmetric range [-(half-1), half-1].
        let r = (self.next_u64() % (span - 1)) as i64;
        r - (half - 1)
    }

    /// `len` coefficients drawn one after another.
    pub fn coefficients(&mut self, len: usize) -> Vec<i8> {
        (0..len).map(|_| self.coefficient()).collect()
    }

    pub fn samples(&mut self, len: usize, width: u32) -> Vec<i64> {
        (0..len).map(|_| self.sample(width)).collect()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<_> = (0..8).map(|_| BankRng::new(7).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut s1 = BankRng::stream(50, 3);
        let mut s2 = BankRng::stream(50, 3);
        let mut s3 = BankRng::stream(50, 4);
        let x1 = s1.next_u64();
        assert_eq!(x1, s2.next_u64());
        assert_ne!(x1, s3.next_u64());
    }

    #[test]
    fn samples_respect_width() {
        let mut rng = BankRng::new(1);
        for width in [1, 2, 8, 16, 32] {
            let bound = 1i64 << (width - 1);
            for s in rng.samples(2000, width) {
                assert!(s.abs() < bound, "{s} escapes {width} bits");
            }
        }
        // width 1 admits only zero.
        assert!(rng.samples(10, 1).iter().all(|&s| s == 0));
    }

    #[test]
    fn coefficient_balance() {
        let mut rng = BankRng::new(DEFAULT_SEED);
        let n = 10_000;
        let plus = rng.coefficients(n).iter().filter(|&&c| c == 1).count() as f64;
        // Binomial(n, 1/2): 4 sigma = 4 * sqrt(n)/2.
        assert!((plus - n as f64 / 2.0).abs() <= 4.0 * (n as f64).sqrt() / 2.0);
    }
}
