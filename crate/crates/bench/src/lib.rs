//! Fixtures shared by the benchmarks.

use fbshare::rng::BankRng;
use fbshare::{FilterBank, SignalFrame};

/// Seeded bank and a 16-bit signal of `len` samples.
pub fn fixture(filters: usize, taps: usize, len: usize, seed: u64) -> (FilterBank, SignalFrame) {
    let bank = FilterBank::random(filters, taps, seed).expect("non-empty bank");
    let x = BankRng::new(seed.wrapping_add(1)).samples(len, 16);
    (bank, SignalFrame::from_samples(x).expect("16-bit samples"))
}
