//! Operation counts for shared filter banks.
//!
//! Counts come in three flavours:
//!
//! * expected counts under iid equiprobable coefficients, where every one of
//!   the `2^J` subsets of a `J`-filter group is assumed occupied;
//! * counts for a concrete bank, where only non-empty subsets cost anything;
//! * serialized variants trading clock rate for fewer operators.
//!
//! The first stage always costs one MAC per tap per group. The second stage
//! costs, per filter, one MAC per subset (`Mac` mode) or one two-input adder
//! per subset beyond the first (`Pyramid` mode).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bank::{
    partition_grouped, plan_grouping, FilterBank, GroupSizes, GroupingPlan, SubsetPartition,
};
use crate::error::{Error, Result};
use crate::rng::BankRng;

/// Largest group size whose expected counts are computed.
pub const MAX_COUNTED_GROUP: usize = 50;

/// How the second (outer) stage combines subset sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// Multiply-and-accumulate chain per filter.
    #[default]
    Mac,
    /// Balanced tree of two-input adders per filter.
    Pyramid,
}

impl fmt::Display for CostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostMode::Mac => "mac",
            CostMode::Pyramid => "pyramid",
        })
    }
}

impl FromStr for CostMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mac" => Ok(CostMode::Mac),
            "pyramid" => Ok(CostMode::Pyramid),
            other => Err(format!(
                "unknown cost mode `{other}` (expected mac or pyramid)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Expected,
    Actual,
}

/// Which stage a serialization factor applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Inner,
    Outer,
    Both,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Inner => "inner",
            Stage::Outer => "outer",
            Stage::Both => "both",
        })
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "inner" => Ok(Stage::Inner),
            "outer" => Ok(Stage::Outer),
            "both" => Ok(Stage::Both),
            other => Err(format!(
                "unknown stage `{other}` (expected inner, outer or both)"
            )),
        }
    }
}

/// Operation counts of one design.
///
/// `C` is `u64` for integer counts and `f64` for the continuous relaxation
/// over fractional group counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport<C = u64> {
    pub kind: CostKind,
    pub mode: CostMode,
    pub filters: usize,
    pub taps: usize,
    pub groups: C,
    /// First-stage MACs.
    pub inner_macs: C,
    /// Second-stage MACs (`Mac` mode only).
    pub outer_macs: C,
    /// Second-stage two-input adders (`Pyramid` mode only).
    pub outer_adds: C,
    pub total_macs: C,
    pub total_ops: C,
    /// Clock multiple of the first-stage resources over the input rate.
    pub inner_rate: u32,
    /// Clock multiple of the second-stage resources over the input rate.
    pub outer_rate: u32,
}

impl<C: Copy + std::ops::Add<Output = C>> CostReport<C> {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: CostKind,
        mode: CostMode,
        filters: usize,
        taps: usize,
        groups: C,
        inner: C,
        outer: C,
        zero: C,
    ) -> Self {
        let (outer_macs, outer_adds) = match mode {
            CostMode::Mac => (outer, zero),
            CostMode::Pyramid => (zero, outer),
        };
        Self {
            kind,
            mode,
            filters,
            taps,
            groups,
            inner_macs: inner,
            outer_macs,
            outer_adds,
            total_macs: inner + outer_macs,
            total_ops: inner + outer_macs + outer_adds,
            inner_rate: 1,
            outer_rate: 1,
        }
    }

    /// Second-stage operations of either kind.
    pub fn outer_ops(&self) -> C {
        self.outer_macs + self.outer_adds
    }

    /// Fastest clock multiple among the design's resources.
    pub fn rate_multiplier(&self) -> u32 {
        self.inner_rate.max(self.outer_rate)
    }

    /// The headline figure: total MACs in `Mac` mode, total operations otherwise.
    pub fn headline(&self) -> C {
        match self.mode {
            CostMode::Mac => self.total_macs,
            CostMode::Pyramid => self.total_ops,
        }
    }
}

/// Expected second-stage operations for one filter of a `size`-filter group.
fn outer_per_filter(size: usize, mode: CostMode) -> Result<u64> {
    if size > MAX_COUNTED_GROUP {
        return Err(Error::Overflow { group_size: size });
    }
    let subsets = 1u64 << size;
    Ok(match mode {
        CostMode::Mac => subsets,
        CostMode::Pyramid => subsets - 1,
    })
}

fn check_dims(filters: usize, taps: usize) -> Result<()> {
    if filters == 0 || taps == 0 {
        return Err(Error::EmptyBank);
    }
    Ok(())
}

/// Expected counts with all `K` filters in a single group.
pub fn expected_cost_ungrouped(filters: usize, taps: usize, mode: CostMode) -> Result<CostReport> {
    check_dims(filters, taps)?;
    let outer = outer_per_filter(filters, mode)?
        .checked_mul(filters as u64)
        .ok_or(Error::Overflow {
            group_size: filters,
        })?;
    Ok(CostReport::assemble(
        CostKind::Expected,
        mode,
        filters,
        taps,
        1,
        taps as u64,
        outer,
        0,
    ))
}

/// Expected counts for a real-valued number of equal groups of `K/G` filters.
pub fn expected_cost_grouped(
    filters: usize,
    taps: usize,
    groups: f64,
    mode: CostMode,
) -> Result<CostReport<f64>> {
    check_dims(filters, taps)?;
    if !(groups >= 1.0 && groups <= filters as f64) {
        return Err(Error::BadGroupCount {
            groups: groups.to_string(),
            filters,
        });
    }
    let k = filters as f64;
    let size = k / groups;
    if size > MAX_COUNTED_GROUP as f64 {
        return Err(Error::Overflow {
            group_size: size.ceil() as usize,
        });
    }
    let subsets = size.exp2();
    let per_filter = match mode {
        CostMode::Mac => subsets,
        CostMode::Pyramid => subsets - 1.0,
    };
    Ok(CostReport::assemble(
        CostKind::Expected,
        mode,
        filters,
        taps,
        groups,
        groups * taps as f64,
        per_filter * k,
        0.0,
    ))
}

/// Expected counts for an integer group count with the larger/smaller group split.
pub fn expected_cost_discrete(
    filters: usize,
    taps: usize,
    groups: usize,
    mode: CostMode,
) -> Result<CostReport> {
    check_dims(filters, taps)?;
    let sizes = GroupSizes::new(filters, groups)?;
    let mut outer = 0u64;
    for (count, size) in sizes.occupied() {
        outer += outer_per_filter(size, mode)? * size as u64 * count as u64;
    }
    Ok(CostReport::assemble(
        CostKind::Expected,
        mode,
        filters,
        taps,
        groups as u64,
        (groups * taps) as u64,
        outer,
        0,
    ))
}

/// Direct-form bank: `K*M` MACs, all booked as filter-stage MACs.
pub fn direct_cost(filters: usize, taps: usize) -> Result<CostReport> {
    check_dims(filters, taps)?;
    Ok(CostReport::assemble(
        CostKind::Expected,
        CostMode::Mac,
        filters,
        taps,
        filters as u64,
        0,
        (filters * taps) as u64,
        0,
    ))
}

/// Counts for a concrete bank's partitions; empty subsets cost nothing.
pub fn actual_cost(
    partitions: &[SubsetPartition],
    plan: &GroupingPlan,
    mode: CostMode,
) -> Result<CostReport> {
    if partitions.len() != plan.group_count() {
        return Err(Error::PlanMismatch(format!(
            "{} partitions for {} groups",
            partitions.len(),
            plan.group_count()
        )));
    }
    let mut inner = 0u64;
    let mut outer = 0u64;
    let mut taps = 0;
    for (part, group) in partitions.iter().zip(plan.groups()) {
        if part.filters() != group.as_slice() {
            return Err(Error::PlanMismatch(format!(
                "partition over filters {:?} where the plan has {:?}",
                part.filters(),
                group
            )));
        }
        taps = part.taps();
        inner += part.covered_taps() as u64;
        for j in 0..part.group_size() {
            let feeding = part.subsets_for(j) as u64;
            outer += match mode {
                CostMode::Mac => feeding,
                CostMode::Pyramid => feeding.saturating_sub(1),
            };
        }
    }
    Ok(CostReport::assemble(
        CostKind::Actual,
        mode,
        plan.filters(),
        taps,
        plan.group_count() as u64,
        inner,
        outer,
        0,
    ))
}

/// Divides the selected stage's counts by `factor` (rounding up) and
/// multiplies its clock rate by `factor`.
///
/// This is resource bookkeeping only; the computed values are unchanged.
pub fn serialized_cost(report: &CostReport, factor: u32, stage: Stage) -> Result<CostReport> {
    if factor < 1 {
        return Err(Error::BadFactor { factor });
    }
    let a = factor as u64;
    let mut out = *report;
    if matches!(stage, Stage::Inner | Stage::Both) {
        out.inner_macs = report.inner_macs.div_ceil(a);
        out.inner_rate = report.inner_rate * factor;
    }
    if matches!(stage, Stage::Outer | Stage::Both) {
        out.outer_macs = report.outer_macs.div_ceil(a);
        out.outer_adds = report.outer_adds.div_ceil(a);
        out.outer_rate = report.outer_rate * factor;
    }
    out.total_macs = out.inner_macs + out.outer_macs;
    out.total_ops = out.total_macs + out.outer_adds;
    Ok(out)
}

/// Mean number of non-empty subsets of a `group_size`-filter group over
/// `taps` iid equiprobable taps: `2^J (1 - (1 - 2^-J)^M)`.
pub fn expected_nonempty_subsets(group_size: usize, taps: usize) -> f64 {
    let cells = (group_size as f64).exp2();
    cells * (1.0 - (1.0 - 1.0 / cells).powf(taps as f64))
}

/// Sample statistics of [`actual_cost`] over random banks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McStats {
    pub trials: usize,
    pub seed: u64,
    pub mode: CostMode,
    pub mean_total_ops: f64,
    pub stddev_total_ops: f64,
    /// Averaged over every group of every trial.
    pub mean_nonempty_per_group: f64,
    pub stddev_nonempty_per_group: f64,
    /// Number of (trial, group) samples behind the subset statistics.
    pub group_samples: usize,
    pub mean_inner_macs: f64,
    pub min_inner_macs: u64,
    pub max_inner_macs: u64,
}

/// Runs `trials` random banks through [`actual_cost`].
///
/// Trial `i` draws its bank from stream `(seed, i)` only, so the result does
/// not depend on evaluation order.
pub fn monte_carlo_cost(
    filters: usize,
    taps: usize,
    groups: usize,
    mode: CostMode,
    trials: usize,
    seed: u64,
) -> Result<McStats> {
    check_dims(filters, taps)?;
    if trials == 0 {
        return Err(Error::BadTrials);
    }
    let plan = plan_grouping(filters, groups)?;
    let mut totals = Vec::with_capacity(trials);
    let mut nonempty = Vec::with_capacity(trials * groups);
    let mut inner = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = BankRng::stream(seed, trial as u64);
        let rows: Vec<Vec<i64>> = (0..filters)
            .map(|_| rng.coefficients(taps).into_iter().map(i64::from).collect())
            .collect();
        let bank = FilterBank::new(&rows)?;
        let parts = partition_grouped(&bank, &plan)?;
        let report = actual_cost(&parts, &plan, mode)?;
        totals.push(report.total_ops as f64);
        inner.push(report.inner_macs);
        nonempty.extend(parts.iter().map(|p| p.len() as f64));
    }
    let (mean_total_ops, stddev_total_ops) = mean_std(&totals);
    let (mean_nonempty_per_group, stddev_nonempty_per_group) = mean_std(&nonempty);
    Ok(McStats {
        trials,
        seed,
        mode,
        mean_total_ops,
        stddev_total_ops,
        mean_nonempty_per_group,
        stddev_nonempty_per_group,
        group_samples: nonempty.len(),
        mean_inner_macs: inner.iter().sum::<u64>() as f64 / trials as f64,
        min_inner_macs: inner.iter().copied().min().unwrap_or(0),
        max_inner_macs: inner.iter().copied().max().unwrap_or(0),
    })
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
