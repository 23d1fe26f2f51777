use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports.
///
/// The `Display` form starts with the variant name so that front ends can
/// surface it verbatim. Filter and tap positions are 0-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(
        "NonUnitCoefficient: coefficient {value} at filter {filter}, tap {tap} is not +1 or -1"
    )]
    NonUnitCoefficient {
        filter: usize,
        tap: usize,
        value: i64,
    },

    #[error("RaggedBank: filter {filter} has {len} taps, expected {expected}")]
    RaggedBank {
        filter: usize,
        len: usize,
        expected: usize,
    },

    #[error("EmptyBank: a filter bank needs at least one filter and one tap")]
    EmptyBank,

    #[error("TooManyFiltersInGroup: {count} filters in one group, at most {max} supported")]
    TooManyFiltersInGroup { count: usize, max: usize },

    #[error("BadFilterIndex: filter index {index} is out of range or repeated (bank has {filters} filters)")]
    BadFilterIndex { index: usize, filters: usize },

    #[error("EmptyGroup: a filter group must contain at least one filter")]
    EmptyGroup,

    #[error("BadGroupCount: {groups} groups requested for {filters} filters")]
    BadGroupCount { groups: String, filters: usize },

    #[error("PlanMismatch: {0}")]
    PlanMismatch(String),

    #[error("AccumulatorOverflowRisk: {taps} taps of {sample_width}-bit samples exceed the 62-bit accumulator headroom")]
    AccumulatorOverflowRisk { taps: usize, sample_width: u32 },

    #[error(
        "SampleOutOfRange: sample {value} at index {index} does not fit in {sample_width} bits"
    )]
    SampleOutOfRange {
        index: usize,
        value: i64,
        sample_width: u32,
    },

    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),

    #[error("Overflow: group of {group_size} filters exceeds the operation counter range")]
    Overflow { group_size: usize },

    #[error("BadFactor: serialization factor {factor} must be at least 1")]
    BadFactor { factor: u32 },

    #[error("BadThreshold: feasibility threshold {rho} must be positive and finite")]
    BadThreshold { rho: f64 },

    #[error("BadRatio: upsampling ratio {ratio} must be at least 1")]
    BadRatio { ratio: usize },

    #[error("BadTrials: Monte-Carlo needs at least one trial")]
    BadTrials,

    #[error("WriteFailure: {path}: {message}")]
    WriteFailure { path: String, message: String },

    #[error("MalformedGraph: {0}")]
    MalformedGraph(String),
}
