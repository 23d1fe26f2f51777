//! Choosing the number of filter groups `G`.
//!
//! More groups mean more first-stage replicas (`G * M` MACs) but exponentially
//! fewer subsets per group in the second stage. Both the integer problem and
//! its real-valued relaxation are convex in `G`.
//!
//! A group of `J` filters is feasible when each of its subsets still holds
//! enough taps on average, i.e. `M / 2^J >= rho`.

use serde::Serialize;

use crate::bank::GroupSizes;
use crate::cost::{expected_cost_discrete, CostMode};
use crate::error::{Error, Result};

/// Default feasibility threshold on `M / 2^J`.
pub const DEFAULT_RHO: f64 = 1.0;

const SAMPLE_STEP: f64 = 0.1;

/// One evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint<T> {
    pub groups: T,
    pub cost: T,
    pub feasible: bool,
    /// `M / 2^J` for the largest group size `J` that occurs.
    pub ratio: f64,
}

/// Outcome of a search over `G`. `T` is `u64` for the integer problem and
/// `f64` for the relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptResult<T> {
    pub best_groups: T,
    pub best_cost: T,
    pub curve: Vec<CurvePoint<T>>,
    pub mode: CostMode,
    pub rho: f64,
    /// `M / 2^(K/G)` at the optimum (largest group size for the integer problem).
    pub constraint_ratio: f64,
    /// False when no candidate met the threshold and the unconstrained optimum
    /// was returned instead.
    pub feasible: bool,
}

fn check_args(filters: usize, taps: usize, rho: f64) -> Result<()> {
    if filters == 0 || taps == 0 {
        return Err(Error::EmptyBank);
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::BadThreshold { rho });
    }
    Ok(())
}

fn ratio(taps: usize, group_size: f64) -> f64 {
    taps as f64 / group_size.exp2()
}

/// Exhaustive search over integer `G` in `1..=K`.
///
/// Feasibility is checked on the group sizes that actually occur. Ties go to
/// the smallest `G`.
pub fn optimize_g_discrete(
    filters: usize,
    taps: usize,
    mode: CostMode,
    rho: f64,
) -> Result<OptResult<u64>> {
    check_args(filters, taps, rho)?;
    let curve = (1..=filters)
        .map(|g| {
            let cost = expected_cost_discrete(filters, taps, g, mode)?.headline();
            let r = ratio(taps, GroupSizes::new(filters, g)?.max_size() as f64);
            Ok(CurvePoint {
                groups: g as u64,
                cost,
                feasible: r >= rho,
                ratio: r,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pick = |only_feasible: bool| {
        curve
            .iter()
            .filter(|p| p.feasible || !only_feasible)
            .min_by_key(|p| (p.cost, p.groups))
            .copied()
    };
    let (best, feasible) = match pick(true) {
        Some(p) => (p, true),
        None => (pick(false).expect("curve is non-empty"), false),
    };
    Ok(OptResult {
        best_groups: best.groups,
        best_cost: best.cost,
        constraint_ratio: best.ratio,
        curve,
        mode,
        rho,
        feasible,
    })
}

/// Expected cost for real `G`: `G M + K 2^(K/G)` in `Mac` mode,
/// `G M + K (2^(K/G) - 1)` in `Pyramid` mode.
pub fn relaxed_objective(filters: usize, taps: usize, groups: f64, mode: CostMode) -> f64 {
    let k = filters as f64;
    let outer = (k / groups).exp2()
        - match mode {
            CostMode::Mac => 0.0,
            CostMode::Pyramid => 1.0,
        };
    groups * taps as f64 + k * outer
}

/// `d/dG` of [`relaxed_objective`]; the same for both modes and increasing in `G`.
fn relaxed_slope(filters: usize, taps: usize, groups: f64) -> f64 {
    let k = filters as f64;
    taps as f64 - k * k * std::f64::consts::LN_2 / (groups * groups) * (k / groups).exp2()
}

/// Minimizer of a convex function on `[lo, hi]` from the sign of its
/// increasing derivative.
fn bisect_slope(lo: f64, hi: f64, slope: impl Fn(f64) -> f64) -> f64 {
    if slope(lo) >= 0.0 {
        return lo;
    }
    if slope(hi) <= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if slope(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-13 * b {
            break;
        }
    }
    0.5 * (a + b)
}

/// Minimizes the relaxed objective over real `G` in `[1, K]`.
///
/// The feasible region `M / 2^(K/G) >= rho` is the interval
/// `G >= K / log2(M / rho)`; the minimizer is taken over its intersection
/// with `[1, K]`. The returned curve samples `G` every 0.1 and includes the
/// minimizer.
pub fn optimize_g_continuous(
    filters: usize,
    taps: usize,
    mode: CostMode,
    rho: f64,
) -> Result<OptResult<f64>> {
    check_args(filters, taps, rho)?;
    let k = filters as f64;
    let slope = |g: f64| relaxed_slope(filters, taps, g);
    let feasible_from = {
        let bits = (taps as f64 / rho).log2();
        if bits > 0.0 {
            (k / bits).max(1.0)
        } else {
            f64::INFINITY
        }
    };
    let (best, feasible) = if feasible_from <= k {
        (bisect_slope(feasible_from, k, slope), true)
    } else {
        (bisect_slope(1.0, k, slope), false)
    };

    let point = |g: f64| {
        let r = ratio(taps, k / g);
        CurvePoint {
            groups: g,
            cost: relaxed_objective(filters, taps, g, mode),
            feasible: r >= rho || (feasible && g >= feasible_from),
            ratio: r,
        }
    };
    let steps = ((k - 1.0) / SAMPLE_STEP).round() as usize;
    let mut curve: Vec<CurvePoint<f64>> = (0..=steps)
        .map(|i| point((1.0 + i as f64 * SAMPLE_STEP).min(k)))
        .collect();
    let best_point = point(best);
    let at = curve.partition_point(|p| p.groups < best);
    if curve.get(at).map(|p| p.groups) != Some(best) {
        curve.insert(at, best_point);
    }
    Ok(OptResult {
        best_groups: best,
        best_cost: best_point.cost,
        curve,
        mode,
        rho,
        constraint_ratio: best_point.ratio,
        feasible,
    })
}

/// Second-stage vs first-stage split of one integer candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Breakdown {
    pub groups: u64,
    pub inner: u64,
    pub outer: u64,
}

/// Curves for one value of `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCurve {
    pub taps: usize,
    pub discrete: OptResult<u64>,
    pub continuous: OptResult<f64>,
    pub breakdown: Vec<Breakdown>,
}

/// Integer and relaxed curves over `G` for each `M` in `taps_list`.
pub fn sweep(
    filters: usize,
    taps_list: &[usize],
    mode: CostMode,
    rho: f64,
) -> Result<Vec<SweepCurve>> {
    taps_list
        .iter()
        .map(|&taps| {
            let breakdown = (1..=filters)
                .map(|g| {
                    let r = expected_cost_discrete(filters, taps, g, mode)?;
                    Ok(Breakdown {
                        groups: g as u64,
                        inner: r.inner_macs,
                        outer: r.outer_ops(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepCurve {
                taps,
                discrete: optimize_g_discrete(filters, taps, mode, rho)?,
                continuous: optimize_g_continuous(filters, taps, mode, rho)?,
                breakdown,
            })
        })
        .collect()
}
