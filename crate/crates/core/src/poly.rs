//! Polyphase interpolators on top of the shared filter bank.
//!
//! Upsampling by `U` followed by a length-`M` filter `h` equals running the
//! `U` phase filters `h_u[i] = h[u + iU]` at the input rate and interleaving
//! their outputs. The phase filters form a `K = U` bank, so the two-stage
//! sharing applies to them directly.

use serde::Serialize;

use crate::bank::{validate_bank, FilterBank, GroupingPlan};
use crate::error::{Error, Result};
use crate::eval::{check_headroom, direct_convolve, shared_evaluate, SignalFrame};

/// A prototype filter split into its polyphase components.
///
/// When `U` does not divide `M` the shorter phases are padded at the end
/// with zero taps so that all rows share one length; padding never enters a
/// subset and is not counted as hardware.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolyphaseSpec {
    prototype: Vec<i8>,
    ratio: usize,
    #[serde(skip)]
    subfilters: FilterBank,
}

impl PolyphaseSpec {
    pub fn prototype(&self) -> &[i8] {
        &self.prototype
    }

    /// Upsampling ratio `U`.
    pub fn ratio(&self) -> usize {
        self.ratio
    }

    /// `U` phase filters, padded to a common length.
    pub fn subfilters(&self) -> &FilterBank {
        &self.subfilters
    }

    /// Real (unpadded) length of phase `u`: `ceil((M - u) / U)`.
    pub fn phase_len(&self, phase: usize) -> usize {
        (self.prototype.len().saturating_sub(phase)).div_ceil(self.ratio)
    }

    /// Interleaves the phase taps back into the prototype.
    pub fn reconstruct(&self) -> Vec<i8> {
        (0..self.prototype.len())
            .map(|m| self.subfilters.coefficient(m % self.ratio, m / self.ratio))
            .collect()
    }
}

fn unit_prototype(h: &[i8]) -> Result<Vec<i8>> {
    let raw: Vec<i64> = h.iter().map(|&c| c as i64).collect();
    let bank = validate_bank(&[raw])?;
    Ok(bank.row(0).to_vec())
}

/// Splits `h` into `U` phases; phase `u` holds `h[u], h[u+U], ...`.
pub fn polyphase_decompose(h: &[i8], ratio: usize) -> Result<PolyphaseSpec> {
    if ratio < 1 {
        return Err(Error::BadRatio { ratio });
    }
    let prototype = unit_prototype(h)?;
    let len = prototype.len().div_ceil(ratio);
    let rows = (0..ratio)
        .map(|u| {
            (0..len)
                .map(|i| prototype.get(u + i * ratio).copied().unwrap_or(0))
                .collect()
        })
        .collect();
    Ok(PolyphaseSpec {
        prototype,
        ratio,
        subfilters: FilterBank::with_padding(rows),
    })
}

/// Reference interpolator: insert `U-1` zeros after each sample, then filter
/// with `h`. The output has `U` samples per input sample.
pub fn interpolate_direct(h: &[i8], ratio: usize, signal: &SignalFrame) -> Result<Vec<i64>> {
    if ratio < 1 {
        return Err(Error::BadRatio { ratio });
    }
    let prototype = unit_prototype(h)?;
    check_headroom(prototype.len(), signal.sample_width())?;
    let stuffed: Vec<i64> = signal
        .samples()
        .iter()
        .flat_map(|&x| std::iter::once(x).chain(std::iter::repeat_n(0, ratio - 1)))
        .collect();
    let stuffed = SignalFrame::new(stuffed, signal.sample_width())?;
    let bank = validate_bank(&[prototype.iter().map(|&c| c as i64).collect::<Vec<_>>()])?;
    Ok(direct_convolve(&bank, &stuffed)?.into_outputs().remove(0))
}

/// Shared evaluation of the phase bank at the input rate, commutated into
/// one stream: output `U n + u` comes from phase `u` at input step `n`.
pub fn interpolate_shared(
    spec: &PolyphaseSpec,
    plan: &GroupingPlan,
    signal: &SignalFrame,
) -> Result<Vec<i64>> {
    let phases = shared_evaluate(&spec.subfilters, plan, signal)?;
    let mut out = Vec::with_capacity(signal.len() * spec.ratio);
    for n in 0..phases.len() {
        out.extend(phases.outputs().iter().map(|phase| phase[n]));
    }
    Ok(out)
}
