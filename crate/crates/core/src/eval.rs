//! Bit-exact evaluation of a filter bank.
//!
//! [`direct_convolve`] is the plain convolution and serves as the reference.
//! [`shared_evaluate`] and [`EvaluatorState`] run the two-stage form: per
//! group, one running sum per non-empty subset, then a signed combination per
//! filter. Both use exact 64-bit integer arithmetic with a zeroed delay line.

use serde::Serialize;

use crate::bank::{partition_grouped, FilterBank, GroupingPlan};
use crate::error::{Error, Result};

/// Nominal input word length.
pub const DEFAULT_SAMPLE_WIDTH: u32 = 16;

/// Integer input samples of a declared bit width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalFrame {
    samples: Vec<i64>,
    sample_width: u32,
}

impl SignalFrame {
    /// Fails with `SampleOutOfRange` if some `|sample| >= 2^(width-1)`.
    pub fn new(samples: Vec<i64>, sample_width: u32) -> Result<Self> {
        if !(1..=63).contains(&sample_width) {
            return Err(Error::SampleOutOfRange {
                index: 0,
                value: 0,
                sample_width,
            });
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !fits(**s, sample_width))
        {
            return Err(Error::SampleOutOfRange {
                index,
                value,
                sample_width,
            });
        }
        Ok(Self {
            samples,
            sample_width,
        })
    }

    /// Frame with the default 16-bit width.
    pub fn from_samples(samples: Vec<i64>) -> Result<Self> {
        Self::new(samples, DEFAULT_SAMPLE_WIDTH)
    }

    pub fn samples(&self) -> &[i64] {
        &self.samples
    }

    pub fn sample_width(&self) -> u32 {
        self.sample_width
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn fits(sample: i64, width: u32) -> bool {
    sample.unsigned_abs() < 1u64 << (width - 1)
}

/// One output stream per filter, in bank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFrame {
    outputs: Vec<Vec<i64>>,
}

impl OutputFrame {
    /// Wraps per-filter streams; all streams must have the same length.
    pub fn from_outputs(outputs: Vec<Vec<i64>>) -> Result<Self> {
        if let Some(first) = outputs.first() {
            if outputs.iter().any(|o| o.len() != first.len()) {
                return Err(Error::ShapeMismatch(
                    "output streams differ in length".into(),
                ));
            }
        }
        Ok(Self { outputs })
    }

    pub fn filters(&self) -> usize {
        self.outputs.len()
    }

    /// Samples per stream.
    pub fn len(&self) -> usize {
        self.outputs.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn output(&self, filter: usize) -> &[i64] {
        &self.outputs[filter]
    }

    pub fn outputs(&self) -> &[Vec<i64>] {
        &self.outputs
    }

    pub fn into_outputs(self) -> Vec<Vec<i64>> {
        self.outputs
    }

    /// Row `n` across all filters.
    pub fn at(&self, n: usize) -> Vec<i64> {
        self.outputs.iter().map(|o| o[n]).collect()
    }

    fn from_rows(filters: usize, rows: Vec<Vec<i64>>) -> Self {
        let mut outputs = vec![Vec::with_capacity(rows.len()); filters];
        for row in rows {
            for (k, v) in row.into_iter().enumerate() {
                outputs[k].push(v);
            }
        }
        Self { outputs }
    }
}

/// Checks `M * 2^(W-1) < 2^62`.
pub(crate) fn check_headroom(taps: usize, sample_width: u32) -> Result<()> {
    let bound = (taps as u128) << (sample_width.saturating_sub(1)).min(127);
    if sample_width == 0 || sample_width > 63 || bound >= 1u128 << 62 {
        return Err(Error::AccumulatorOverflowRisk { taps, sample_width });
    }
    Ok(())
}

/// `y_k[n] = sum_m x[n-m] h_k[m]` with `x[i] = 0` for `i < 0`.
pub fn direct_convolve(bank: &FilterBank, signal: &SignalFrame) -> Result<OutputFrame> {
    check_headroom(bank.taps(), signal.sample_width())?;
    let x = signal.samples();
    let outputs = bank
        .rows()
        .map(|h| {
            (0..x.len())
                .map(|n| {
                    h.iter()
                        .take(n + 1)
                        .enumerate()
                        .map(|(m, &c)| x[n - m] * c as i64)
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(OutputFrame { outputs })
}

/// Per-group tables for the two-stage evaluation.
#[derive(Debug, Clone)]
struct GroupKernel {
    /// Subset slot of each tap, `None` when the tap is padding for the whole group.
    slot_of_tap: Vec<Option<usize>>,
    /// `(bank filter, signs per slot)` for each filter of the group.
    combine: Vec<(usize, Vec<i8>)>,
}

/// Streaming two-stage evaluator with a shared delay line.
#[derive(Debug, Clone)]
pub struct EvaluatorState {
    filters: usize,
    sample_width: u32,
    /// Ring buffer; `delay[(head + m) % M]` holds `x[n-m]`.
    delay: Vec<i64>,
    head: usize,
    kernels: Vec<GroupKernel>,
    sums: Vec<Vec<i64>>,
}

impl EvaluatorState {
    pub fn new(bank: &FilterBank, plan: &GroupingPlan, sample_width: u32) -> Result<Self> {
        check_headroom(bank.taps(), sample_width)?;
        let partitions = partition_grouped(bank, plan)?;
        let kernels: Vec<GroupKernel> = partitions
            .iter()
            .map(|part| {
                let mut slot_of_tap = vec![None; bank.taps()];
                for (slot, taps) in part.subsets().values().enumerate() {
                    for &m in taps {
                        slot_of_tap[m] = Some(slot);
                    }
                }
                let combine = part
                    .filters()
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| (k, part.subsets().keys().map(|p| p.sign(j)).collect()))
                    .collect();
                GroupKernel {
                    slot_of_tap,
                    combine,
                }
            })
            .collect();
        let sums = partitions.iter().map(|p| vec![0; p.len()]).collect();
        Ok(Self {
            filters: bank.filters(),
            sample_width,
            delay: vec![0; bank.taps()],
            head: 0,
            kernels,
            sums,
        })
    }

    /// Pushes one sample and returns `y_1..y_K` for this instant.
    pub fn step(&mut self, sample: i64) -> Result<Vec<i64>> {
        if !fits(sample, self.sample_width) {
            return Err(Error::AccumulatorOverflowRisk {
                taps: self.delay.len(),
                sample_width: self.sample_width,
            });
        }
        let len = self.delay.len();
        self.head = (self.head + len - 1) % len;
        self.delay[self.head] = sample;

        let mut out = vec![0; self.filters];
        for (kernel, sums) in self.kernels.iter().zip(&mut self.sums) {
            sums.iter_mut().for_each(|s| *s = 0);
            for (m, slot) in kernel.slot_of_tap.iter().enumerate() {
                if let Some(slot) = *slot {
                    sums[slot] += self.delay[(self.head + m) % len];
                }
            }
            for (k, signs) in &kernel.combine {
                out[*k] = signs
                    .iter()
                    .zip(sums.iter())
                    .map(|(&s, &t)| s as i64 * t)
                    .sum();
            }
        }
        Ok(out)
    }

    /// First-stage subset sums of the latest step, per group in pattern order.
    pub fn subset_sums(&self) -> &[Vec<i64>] {
        &self.sums
    }

    /// Clears the delay line.
    pub fn reset(&mut self) {
        self.delay.iter_mut().for_each(|d| *d = 0);
        self.sums.iter_mut().flatten().for_each(|s| *s = 0);
        self.head = 0;
    }
}

/// Two-stage evaluation of the whole signal; equals [`direct_convolve`].
pub fn shared_evaluate(
    bank: &FilterBank,
    plan: &GroupingPlan,
    signal: &SignalFrame,
) -> Result<OutputFrame> {
    let mut state = EvaluatorState::new(bank, plan, signal.sample_width())?;
    let rows = signal
        .samples()
        .iter()
        .map(|&x| state.step(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutputFrame::from_rows(bank.filters(), rows))
}

/// Result of comparing two output frames sample by sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    pub equal: bool,
    /// `(filter, sample)` of the first difference in filter-major order.
    pub first_mismatch: Option<(usize, usize)>,
    pub max_abs_diff: u64,
}

pub fn compare_outputs(a: &OutputFrame, b: &OutputFrame) -> Result<EquivalenceReport> {
    if a.filters() != b.filters() || a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.filters(),
            a.len(),
            b.filters(),
            b.len()
        )));
    }
    let mut first_mismatch = None;
    let mut max_abs_diff = 0;
    for (k, (ya, yb)) in a.outputs.iter().zip(&b.outputs).enumerate() {
        for (n, (&va, &vb)) in ya.iter().zip(yb).enumerate() {
            let d = va.abs_diff(vb);
            if d != 0 && first_mismatch.is_none() {
                first_mismatch = Some((k, n));
            }
            max_abs_diff = max_abs_diff.max(d);
        }
    }
    Ok(EquivalenceReport {
        equal: first_mismatch.is_none(),
        first_mismatch,
        max_abs_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{plan_grouping, validate_bank};
    use crate::rng::BankRng;
    use proptest::prelude::*;

    /// Independent textbook convolution with explicit bounds checks.
    fn naive(h: &[i8], x: &[i64]) -> Vec<i64> {
        let mut y = vec![0i64; x.len()];
        for n in 0..x.len() {
            for m in 0..h.len() {
                if n >= m {
                    y[n] += x[n - m] * h[m] as i64;
                }
            }
        }
        y
    }

    fn example_bank() -> FilterBank {
        validate_bank(&[vec![1, -1, 1, -1], vec![1, 1, -1, -1]]).unwrap()
    }

    fn frame(x: &[i64]) -> SignalFrame {
        SignalFrame::from_samples(x.to_vec()).unwrap()
    }

    #[test]
    fn direct_hand_values() {
        let bank = validate_bank(&[vec![1, -1, 1, -1]]).unwrap();
        let y = direct_convolve(&bank, &frame(&[1, 2, 3, 4])).unwrap();
        assert_eq!(y.output(0), &[1, 1, 2, 2]);

        let id = validate_bank(&[vec![1]]).unwrap();
        assert_eq!(
            direct_convolve(&id, &frame(&[5, -7])).unwrap().output(0),
            &[5, -7]
        );

        let zeros = direct_convolve(&example_bank(), &frame(&[0; 9])).unwrap();
        assert!(zeros.outputs().iter().flatten().all(|&v| v == 0));
    }

    #[test]
    fn shared_matches_direct_on_example() {
        let bank = example_bank();
        let x = frame(&[1, 2, 3, 4]);
        let plan = plan_grouping(2, 1).unwrap();
        let shared = shared_evaluate(&bank, &plan, &x).unwrap();
        assert_eq!(shared, direct_convolve(&bank, &x).unwrap());
        assert_eq!(shared.at(3), vec![2, 4]);
        assert_eq!(shared.output(0), naive(bank.row(0), x.samples()).as_slice());
    }

    #[test]
    fn single_filter_subset_sums() {
        let bank = validate_bank(&[vec![1, 1, -1]]).unwrap();
        let plan = plan_grouping(1, 1).unwrap();
        let mut state = EvaluatorState::new(&bank, &plan, 16).unwrap();
        let x = [3i64, -1, 4, 1, -5];
        for n in 0..x.len() {
            let y = state.step(x[n]).unwrap();
            let at = |i: usize| if n >= i { x[n - i] } else { 0 };
            // slots in ascending pattern order: pattern 0 then pattern 1
            let sums = &state.subset_sums()[0];
            assert_eq!(sums, &vec![at(2), at(0) + at(1)]);
            assert_eq!(y, vec![sums[1] - sums[0]]);
        }
    }

    #[test]
    fn step_examples() {
        let bank = example_bank();
        let plan = plan_grouping(2, 1).unwrap();
        let mut fresh = EvaluatorState::new(&bank, &plan, 16).unwrap();
        assert_eq!(fresh.step(0).unwrap(), vec![0, 0]);

        let mut a = EvaluatorState::new(&bank, &plan, 16).unwrap();
        let mut b = a.clone();
        let mut last = vec![];
        for x in [1, 2, 3, 4] {
            last = a.step(x).unwrap();
            assert_eq!(last, b.step(x).unwrap());
        }
        assert_eq!(last, vec![2, 4]);

        a.reset();
        assert_eq!(a.step(1).unwrap(), vec![1, 1]);
    }

    #[test]
    fn step_rejects_wide_samples() {
        let bank = example_bank();
        let plan = plan_grouping(2, 2).unwrap();
        let mut s = EvaluatorState::new(&bank, &plan, 8).unwrap();
        assert!(s.step(127).is_ok());
        assert!(matches!(
            s.step(128),
            Err(Error::AccumulatorOverflowRisk { .. })
        ));
    }

    #[test]
    fn headroom_guard() {
        assert!(check_headroom(1 << 15, 47).is_ok());
        assert!(check_headroom(1 << 15, 48).is_err());
        let bank = example_bank();
        let wide = SignalFrame::new(vec![0; 4], 62).unwrap();
        assert!(matches!(
            direct_convolve(&bank, &wide),
            Err(Error::AccumulatorOverflowRisk {
                taps: 4,
                sample_width: 62
            })
        ));
        assert!(matches!(
            shared_evaluate(&bank, &plan_grouping(2, 1).unwrap(), &wide),
            Err(Error::AccumulatorOverflowRisk { .. })
        ));
    }

    #[test]
    fn signal_frame_validation() {
        assert!(SignalFrame::new(vec![32767, -32767], 16).is_ok());
        assert_eq!(
            SignalFrame::new(vec![0, -32768], 16),
            Err(Error::SampleOutOfRange {
                index: 1,
                value: -32768,
                sample_width: 16
            })
        );
        assert!(SignalFrame::new(vec![], 0).is_err());
    }

    #[test]
    fn plan_mismatch_is_reported() {
        let bank = example_bank();
        assert!(matches!(
            shared_evaluate(&bank, &plan_grouping(3, 1).unwrap(), &frame(&[1])),
            Err(Error::PlanMismatch(_))
        ));
    }

    #[test]
    fn compare_examples() {
        let a = OutputFrame::from_outputs(vec![vec![0; 10]; 3]).unwrap();
        let rep = compare_outputs(&a, &a.clone()).unwrap();
        assert!(rep.equal);
        assert_eq!(rep.first_mismatch, None);
        assert_eq!(rep.max_abs_diff, 0);

        let mut rows = a.clone().into_outputs();
        rows[2][7] = 3;
        rows[2][9] = -1;
        let b = OutputFrame::from_outputs(rows).unwrap();
        let rep = compare_outputs(&a, &b).unwrap();
        assert!(!rep.equal);
        assert_eq!(rep.first_mismatch, Some((2, 7)));
        assert_eq!(rep.max_abs_diff, 3);

        let short = OutputFrame::from_outputs(vec![vec![0; 9]; 3]).unwrap();
        assert!(matches!(
            compare_outputs(&a, &short),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(OutputFrame::from_outputs(vec![vec![0; 2], vec![0; 3]]).is_err());
    }

    #[test]
    fn seeded_banks_match_naive() {
        let mut rng = BankRng::new(11);
        for case in 0..50u64 {
            let k = rng.range(1, 8);
            let m = rng.range(1, 128);
            let bank = FilterBank::random(k, m, case).unwrap();
            let x = SignalFrame::from_samples(rng.samples(2 * m, 16)).unwrap();
            let g = rng.range(1, k);
            let shared = shared_evaluate(&bank, &plan_grouping(k, g).unwrap(), &x).unwrap();
            for (f, h) in bank.rows().enumerate() {
                assert_eq!(
                    shared.output(f),
                    naive(h, x.samples()).as_slice(),
                    "case {case}"
                );
            }
            assert!(
                compare_outputs(&shared, &direct_convolve(&bank, &x).unwrap())
                    .unwrap()
                    .equal
            );
        }
    }

    fn arb_case() -> impl Strategy<Value = (FilterBank, usize, Vec<i64>, Vec<i64>)> {
        (1usize..=8, 1usize..=96, any::<u64>()).prop_flat_map(|(k, m, seed)| {
            let bank = FilterBank::random(k, m, seed).unwrap();
            let sig = prop::collection::vec(-16000i64..16000, 4 * m);
            (Just(bank), 1..=k, sig.clone(), sig)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn oracle_equivalence((bank, g, x, _) in arb_case()) {
            let x = SignalFrame::from_samples(x).unwrap();
            let shared = shared_evaluate(&bank, &plan_grouping(bank.filters(), g).unwrap(), &x).unwrap();
            prop_assert_eq!(shared, direct_convolve(&bank, &x).unwrap());
        }

        #[test]
        fn values_do_not_depend_on_grouping((bank, _, x, _) in arb_case()) {
            let x = SignalFrame::from_samples(x).unwrap();
            let k = bank.filters();
            let reference = shared_evaluate(&bank, &plan_grouping(k, 1).unwrap(), &x).unwrap();
            for g in 2..=k {
                prop_assert_eq!(&shared_evaluate(&bank, &plan_grouping(k, g).unwrap(), &x).unwrap(), &reference);
            }
        }

        #[test]
        fn superposition((bank, g, x, x2) in arb_case()) {
            let plan = plan_grouping(bank.filters(), g).unwrap();
            let sum: Vec<i64> = x.iter().zip(&x2).map(|(a, b)| a + b).collect();
            let ya = shared_evaluate(&bank, &plan, &SignalFrame::from_samples(x).unwrap()).unwrap();
            let yb = shared_evaluate(&bank, &plan, &SignalFrame::from_samples(x2).unwrap()).unwrap();
            let ys = shared_evaluate(&bank, &plan, &SignalFrame::from_samples(sum).unwrap()).unwrap();
            for k in 0..bank.filters() {
                let added: Vec<i64> = ya.output(k).iter().zip(yb.output(k)).map(|(a, b)| a + b).collect();
                prop_assert_eq!(ys.output(k), added.as_slice());
            }
        }

        #[test]
        fn stage_one_conserves_taps((bank, g, x, _) in arb_case()) {
            let plan = plan_grouping(bank.filters(), g).unwrap();
            let mut state = EvaluatorState::new(&bank, &plan, 16).unwrap();
            for n in 0..x.len() {
                state.step(x[n]).unwrap();
                let window: i64 = (0..bank.taps()).filter(|&m| m <= n).map(|m| x[n - m]).sum();
                for group in state.subset_sums() {
                    prop_assert_eq!(group.iter().sum::<i64>(), window);
                }
            }
        }
    }
}
