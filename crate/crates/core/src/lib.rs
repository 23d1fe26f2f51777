//! Two-stage coefficient sharing for parallel filter banks whose taps are all +1 or -1.
//!
//! A bank of `K` such filters sharing one tapped delay line can be rewritten as
//! a first stage that sums the delayed samples falling into each intersection
//! subset of the filters' sign patterns, followed by a second stage that forms
//! every filter output as a signed combination of those subset sums.
//!
//! The crate is organised bottom-up:
//!
//! * [`bank`]: filter banks, subset partitions, sign rule and grouping plans.
//! * [`eval`]: bit-exact direct and shared evaluation.
//! * [`cost`]: expected and instance-level operation counts.
//! * [`opt`]: choosing the number of groups.
//! * [`poly`]: polyphase interpolators built on the shared bank.
//! * [`graph`]: explicit dataflow graphs, latency and export.

pub mod bank;
pub mod cost;
mod error;
pub mod eval;
pub mod graph;
pub mod opt;
pub mod poly;
pub mod rng;

pub use bank::{
    build_partition, partition_grouped, plan_grouping, sign_of, validate_bank, BitPattern,
    FilterBank, GroupSizes, GroupingPlan, SubsetPartition, MAX_GROUP_FILTERS,
};
pub use cost::{
    actual_cost, direct_cost, expected_cost_discrete, expected_cost_grouped,
    expected_cost_ungrouped, expected_nonempty_subsets, monte_carlo_cost, serialized_cost,
    CostKind, CostMode, CostReport, McStats, Stage,
};
pub use error::{Error, Result};
pub use eval::{
    compare_outputs, direct_convolve, shared_evaluate, EquivalenceReport, EvaluatorState,
    OutputFrame, SignalFrame, DEFAULT_SAMPLE_WIDTH,
};
pub use graph::{
    build_graph, export_graph, import_graph, latency_of, write_graph, DataflowGraph, Edge,
    GraphMeta, Node, NodeKind,
};
pub use opt::{
    optimize_g_continuous, optimize_g_discrete, relaxed_objective, sweep, CurvePoint, OptResult,
    SweepCurve, DEFAULT_RHO,
};
pub use poly::{interpolate_direct, interpolate_shared, polyphase_decompose, PolyphaseSpec};
