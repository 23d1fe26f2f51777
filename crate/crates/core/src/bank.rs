//! Filter banks, intersection-subset partitions and grouping plans.
//!
//! For a group of `J` filters every tap index `m` is labelled by a `J`-bit
//! pattern whose bit `j` is set iff the `j`-th filter of the group has a +1
//! coefficient at `m`. Taps sharing a label form one subset; the subsets are
//! disjoint and together cover every tap, so a single sum per subset is enough
//! to rebuild every filter of the group with signs only.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::BankRng;

/// Largest group size for which the `2^J` pattern space is enumerated.
pub const MAX_GROUP_FILTERS: usize = 30;

/// `K` filters of `M` taps, each tap +1 or -1.
///
/// Banks produced by polyphase decomposition may also carry padding taps,
/// stored as 0. Padding never appears in banks built through
/// [`validate_bank`] or [`FilterBank::random`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FilterBank {
    filters: usize,
    taps: usize,
    coeffs: Vec<i8>,
}

impl FilterBank {
    /// Validating constructor, same as [`validate_bank`].
    pub fn new<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        validate_bank(rows)
    }

    /// Bank with every coefficient drawn independently and equiprobably.
    pub fn random(filters: usize, taps: usize, seed: u64) -> Result<Self> {
        if filters == 0 || taps == 0 {
            return Err(Error::EmptyBank);
        }
        let mut rng = BankRng::new(seed);
        Ok(Self {
            filters,
            taps,
            coeffs: rng.coefficients(filters * taps),
        })
    }

    /// Bank whose rows may contain 0 for padding taps. Rows must already be
    /// equal length and non-empty.
    pub(crate) fn with_padding(rows: Vec<Vec<i8>>) -> Self {
        let filters = rows.len();
        let taps = rows[0].len();
        debug_assert!(rows.iter().all(|r| r.len() == taps));
        debug_assert!(rows.iter().flatten().all(|c| (-1..=1).contains(c)));
        Self {
            filters,
            taps,
            coeffs: rows.into_iter().flatten().collect(),
        }
    }

    /// Number of filters `K`.
    pub fn filters(&self) -> usize {
        self.filters
    }

    /// Taps per filter `M`.
    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn coefficient(&self, filter: usize, tap: usize) -> i8 {
        self.coeffs[filter * self.taps + tap]
    }

    pub fn row(&self, filter: usize) -> &[i8] {
        &self.coeffs[filter * self.taps..(filter + 1) * self.taps]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> + '_ {
        self.coeffs.chunks(self.taps)
    }

    pub fn to_rows(&self) -> Vec<Vec<i8>> {
        self.rows().map(<[i8]>::to_vec).collect()
    }

    pub fn is_padding(&self, filter: usize, tap: usize) -> bool {
        self.coefficient(filter, tap) == 0
    }

    pub fn has_padding(&self) -> bool {
        self.coeffs.contains(&0)
    }

    /// Number of non-padding taps of one filter.
    pub fn real_taps(&self, filter: usize) -> usize {
        self.row(filter).iter().filter(|&&c| c != 0).count()
    }
}

/// Checks a raw integer matrix and turns it into a [`FilterBank`].
///
/// Emptiness is checked first, then row lengths, then coefficient values in
/// row-major order.
pub fn validate_bank<R: AsRef<[i64]>>(raw: &[R]) -> Result<FilterBank> {
    let taps = match raw.first() {
        Some(r) if !r.as_ref().is_empty() => r.as_ref().len(),
        _ => return Err(Error::EmptyBank),
    };
    for (filter, row) in raw.iter().enumerate() {
        let len = row.as_ref().len();
        if len != taps {
            return Err(Error::RaggedBank {
                filter,
                len,
                expected: taps,
            });
        }
    }
    let mut coeffs = Vec::with_capacity(raw.len() * taps);
    for (filter, row) in raw.iter().enumerate() {
        for (tap, &value) in row.as_ref().iter().enumerate() {
            match value {
                1 => coeffs.push(1),
                -1 => coeffs.push(-1),
                _ => return Err(Error::NonUnitCoefficient { filter, tap, value }),
            }
        }
    }
    Ok(FilterBank {
        filters: raw.len(),
        taps,
        coeffs,
    })
}

/// Sign pattern labelling one subset of a group.
///
/// Bit `j` of `value` is the sign of the group's `j`-th filter (1 for +1).
/// `present` marks the filters that actually own a coefficient at the
/// subset's taps; it is all ones except for padded polyphase banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BitPattern {
    value: u32,
    present: u32,
    width: u8,
}

impl BitPattern {
    pub fn new(value: u32, width: usize) -> Result<Self> {
        let present = full_mask(width)?;
        if value & !present != 0 {
            return Err(Error::BadFilterIndex {
                index: (32 - value.leading_zeros()) as usize - 1,
                filters: width,
            });
        }
        Ok(Self {
            value,
            present,
            width: width as u8,
        })
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn present(&self) -> u32 {
        self.present
    }

    /// Whether the pattern covers every filter of its group.
    pub fn is_full(&self) -> bool {
        self.present == full_mask(self.width()).unwrap_or(u32::MAX)
    }

    pub fn contains(&self, position: usize) -> bool {
        position < self.width() && self.present >> position & 1 == 1
    }

    pub fn bit(&self, position: usize) -> bool {
        self.value >> position & 1 == 1
    }

    /// Coefficient of the `position`-th group filter on this subset: +1, -1,
    /// or 0 when that filter has only padding here.
    pub fn sign(&self, position: usize) -> i8 {
        if !self.contains(position) {
            0
        } else if self.bit(position) {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for BitPattern {
    /// Most significant filter first, `x` for absent filters.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in (0..self.width()).rev() {
            let c = match self.sign(j) {
                1 => '1',
                -1 => '0',
                _ => 'x',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn full_mask(width: usize) -> Result<u32> {
    if width == 0 {
        return Err(Error::EmptyGroup);
    }
    if width > MAX_GROUP_FILTERS {
        return Err(Error::TooManyFiltersInGroup {
            count: width,
            max: MAX_GROUP_FILTERS,
        });
    }
    Ok((1u32 << width) - 1)
}

/// Sign of the `position`-th filter (0-based) of a group on subset `pattern`.
///
/// +1 iff bit `position` is set, otherwise -1; 0 only for padded positions.
pub fn sign_of(position: usize, pattern: BitPattern) -> i8 {
    debug_assert!(position < pattern.width());
    pattern.sign(position)
}

/// Subsets of tap indices keyed by sign pattern, for one group of filters.
///
/// Only non-empty subsets are stored. Keys and tap lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetPartition {
    filters: Vec<usize>,
    taps: usize,
    subsets: BTreeMap<BitPattern, Vec<usize>>,
}

impl SubsetPartition {
    /// Bank filter indices of the group, in bit order.
    pub fn filters(&self) -> &[usize] {
        &self.filters
    }

    pub fn group_size(&self) -> usize {
        self.filters.len()
    }

    /// `M` of the bank the partition was built from.
    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn subsets(&self) -> &BTreeMap<BitPattern, Vec<usize>> {
        &self.subsets
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BitPattern, &Vec<usize>)> + '_ {
        self.subsets.iter()
    }

    /// Number of non-empty subsets.
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Taps of the full-width subset with the given pattern value.
    pub fn get(&self, value: u32) -> Option<&[usize]> {
        let key = BitPattern::new(value, self.group_size()).ok()?;
        self.subsets.get(&key).map(Vec::as_slice)
    }

    /// Number of tap indices placed in some subset.
    pub fn covered_taps(&self) -> usize {
        self.subsets.values().map(Vec::len).sum()
    }

    /// Number of non-empty subsets that feed the `position`-th filter.
    pub fn subsets_for(&self, position: usize) -> usize {
        self.subsets.keys().filter(|p| p.contains(position)).count()
    }
}

/// Partitions the taps of the filters in `filter_subset` (0-based bank indices)
/// by their joint sign pattern.
///
/// Taps where every listed filter is padding are left out.
pub fn build_partition(bank: &FilterBank, filter_subset: &[usize]) -> Result<SubsetPartition> {
    let width = filter_subset.len();
    full_mask(width)?;
    let mut seen = vec![false; bank.filters()];
    for &index in filter_subset {
        if index >= bank.filters() || std::mem::replace(&mut seen[index], true) {
            return Err(Error::BadFilterIndex {
                index,
                filters: bank.filters(),
            });
        }
    }

    let mut subsets: BTreeMap<BitPattern, Vec<usize>> = BTreeMap::new();
    for tap in 0..bank.taps() {
        let (mut value, mut present) = (0u32, 0u32);
        for (j, &filter) in filter_subset.iter().enumerate() {
            match bank.coefficient(filter, tap) {
                1 => {
                    value |= 1 << j;
                    present |= 1 << j;
                }
                -1 => present |= 1 << j,
                _ => {}
            }
        }
        if present == 0 {
            continue;
        }
        let key = BitPattern {
            value,
            present,
            width: width as u8,
        };
        subsets.entry(key).or_default().push(tap);
    }
    Ok(SubsetPartition {
        filters: filter_subset.to_vec(),
        taps: bank.taps(),
        subsets,
    })
}

/// Group counts and sizes when `K` filters are split into `G` groups.
///
/// `n_large = K mod G` groups hold `size_large = (K - K mod G)/G + 1`
/// filters and the remaining `n_small` groups hold one fewer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GroupSizes {
    pub n_large: usize,
    pub size_large: usize,
    pub n_small: usize,
    pub size_small: usize,
}

impl GroupSizes {
    pub fn new(filters: usize, groups: usize) -> Result<Self> {
        if groups < 1 || groups > filters {
            return Err(Error::BadGroupCount {
                groups: groups.to_string(),
                filters,
            });
        }
        let rem = filters % groups;
        let base = (filters - rem) / groups;
        Ok(Self {
            n_large: rem,
            size_large: base + 1,
            n_small: groups - rem,
            size_small: base,
        })
    }

    /// `(count, size)` pairs for the group sizes that actually occur.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize)> {
        [
            (self.n_large, self.size_large),
            (self.n_small, self.size_small),
        ]
        .into_iter()
        .filter(|&(n, _)| n > 0)
    }

    /// Size of the largest group that occurs.
    pub fn max_size(&self) -> usize {
        if self.n_large > 0 {
            self.size_large
        } else {
            self.size_small
        }
    }
}

/// Assignment of the bank's filters to `G` groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupingPlan {
    filters: usize,
    sizes: GroupSizes,
    groups: Vec<Vec<usize>>,
}

impl GroupingPlan {
    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Filter indices (0-based) per group.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn sizes(&self) -> GroupSizes {
        self.sizes
    }

    pub fn n_large(&self) -> usize {
        self.sizes.n_large
    }

    pub fn size_large(&self) -> usize {
        self.sizes.size_large
    }

    pub fn n_small(&self) -> usize {
        self.sizes.n_small
    }

    pub fn size_small(&self) -> usize {
        self.sizes.size_small
    }

    /// `(group, position)` of every filter, indexed by filter.
    pub fn locate(&self) -> Vec<(usize, usize)> {
        let mut at = vec![(0, 0); self.filters];
        for (g, group) in self.groups.iter().enumerate() {
            for (j, &k) in group.iter().enumerate() {
                at[k] = (g, j);
            }
        }
        at
    }

    pub(crate) fn check_bank(&self, bank: &FilterBank) -> Result<()> {
        if self.filters != bank.filters() {
            return Err(Error::PlanMismatch(format!(
                "plan covers {} filters, bank has {}",
                self.filters,
                bank.filters()
            )));
        }
        Ok(())
    }
}

/// Splits filters `0..K` into `G` contiguous groups, larger groups first.
pub fn plan_grouping(filters: usize, groups: usize) -> Result<GroupingPlan> {
    let sizes = GroupSizes::new(filters, groups)?;
    let mut next = 0;
    let lens = std::iter::repeat_n(sizes.size_large, sizes.n_large)
        .chain(std::iter::repeat_n(sizes.size_small, sizes.n_small));
    let groups = lens
        .map(|len| {
            let g: Vec<usize> = (next..next + len).collect();
            next += len;
            g
        })
        .collect();
    Ok(GroupingPlan {
        filters,
        sizes,
        groups,
    })
}

/// One partition per group of `plan`.
pub fn partition_grouped(bank: &FilterBank, plan: &GroupingPlan) -> Result<Vec<SubsetPartition>> {
    plan.check_bank(bank)?;
    plan.groups()
        .iter()
        .map(|group| build_partition(bank, group))
        .collect()
}
