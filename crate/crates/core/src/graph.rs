//! Explicit two-stage dataflow graphs.
//!
//! Node layout, in id order: the `M` shared taps, then per group its subset
//! accumulators (ascending pattern) followed by the combine nodes of each of
//! its filters, and finally the `K` outputs in bank order. Every edge points
//! from a lower id to a higher one.
//!
//! A node's value is the signed sum of its inputs. Taps read the delay line;
//! subset accumulators add their taps (one first-stage MAC per incoming
//! edge); `add`/`sub`/`mac` nodes form the second stage.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bank::{partition_grouped, FilterBank, GroupingPlan};
use crate::cost::{CostKind, CostMode, CostReport};
use crate::error::{Error, Result};
use crate::eval::{check_headroom, OutputFrame, SignalFrame};

/// Group index recorded on the shared tap nodes.
pub const SHARED_GROUP: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Tap,
    SubsetAcc,
    Add,
    Sub,
    Mac,
    Output,
}

impl NodeKind {
    fn is_tree(self) -> bool {
        matches!(self, NodeKind::Add | NodeKind::Sub)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Tap => "tap",
            NodeKind::SubsetAcc => "subset_acc",
            NodeKind::Add => "add",
            NodeKind::Sub => "sub",
            NodeKind::Mac => "mac",
            NodeKind::Output => "output",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    /// Owning group, or [`SHARED_GROUP`] for taps.
    pub group: i64,
    /// Pipeline depth: taps 0, subset accumulators 1, then one per combine level.
    pub stage: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMeta {
    #[serde(rename = "K")]
    pub filters: usize,
    #[serde(rename = "M")]
    pub taps: usize,
    #[serde(rename = "G")]
    pub groups: usize,
    pub mode: CostMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataflowGraph {
    pub meta: GraphMeta,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Pipeline delay of each output in cycles, bank order.
    pub latency: Vec<u32>,
}

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl Builder {
    fn node(&mut self, kind: NodeKind, group: i64, stage: u32) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            kind,
            group,
            stage,
        });
        id
    }

    fn edge(&mut self, src: usize, dst: usize, sign: i8) {
        self.edges.push(Edge { src, dst, sign });
    }
}

/// Builds the two-stage graph of `bank` under `plan`.
///
/// Pyramid mode gives each filter a balanced tree of two-input nodes over its
/// group's subset accumulators, an odd operand being carried to the next
/// level. MAC mode gives each filter a chain of one `mac` per subset.
pub fn build_graph(
    bank: &FilterBank,
    plan: &GroupingPlan,
    mode: CostMode,
) -> Result<DataflowGraph> {
    let partitions = partition_grouped(bank, plan)?;
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    for _ in 0..bank.taps() {
        b.node(NodeKind::Tap, SHARED_GROUP, 0);
    }

    // (node feeding the output, sign, stage of that node) per filter
    let mut heads = vec![None; bank.filters()];
    for (g, part) in partitions.iter().enumerate() {
        let group = g as i64;
        let accs: Vec<usize> = part
            .subsets()
            .values()
            .map(|taps| {
                let acc = b.node(NodeKind::SubsetAcc, group, 1);
                for &m in taps {
                    b.edge(m, acc, 1);
                }
                acc
            })
            .collect();

        for (j, &filter) in part.filters().iter().enumerate() {
            let leaves: Vec<(usize, i8)> = part
                .subsets()
                .keys()
                .zip(&accs)
                .filter(|(p, _)| p.contains(j))
                .map(|(p, &acc)| (acc, p.sign(j)))
                .collect();
            heads[filter] = match mode {
                CostMode::Pyramid => pyramid(&mut b, group, leaves),
                CostMode::Mac => mac_chain(&mut b, group, leaves),
            };
        }
    }

    let locate = plan.locate();
    for (filter, head) in heads.into_iter().enumerate() {
        let group = locate[filter].0 as i64;
        let stage = head.map_or(1, |(_, _, s)| s) + 1;
        let out = b.node(NodeKind::Output, group, stage);
        if let Some((src, sign, _)) = head {
            b.edge(src, out, sign);
        }
    }

    let mut graph = DataflowGraph {
        meta: GraphMeta {
            filters: bank.filters(),
            taps: bank.taps(),
            groups: plan.group_count(),
            mode,
        },
        nodes: b.nodes,
        edges: b.edges,
        latency: Vec::new(),
    };
    graph.latency = latency_of(&graph);
    Ok(graph)
}

fn pyramid(b: &mut Builder, group: i64, leaves: Vec<(usize, i8)>) -> Option<(usize, i8, u32)> {
    let mut level: Vec<(usize, i8, u32)> = leaves.into_iter().map(|(n, s)| (n, s, 1)).collect();
    let mut stage = 1;
    while level.len() > 1 {
        stage += 1;
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            match *pair {
                [(a, sa, _), (c, sc, _)] => {
                    let kind = if sa < 0 || sc < 0 {
                        NodeKind::Sub
                    } else {
                        NodeKind::Add
                    };
                    let node = b.node(kind, group, stage);
                    b.edge(a, node, sa);
                    b.edge(c, node, sc);
                    next.push((node, 1, stage));
                }
                [carry] => next.push(carry),
                _ => unreachable!(),
            }
        }
        level = next;
    }
    level.pop()
}

fn mac_chain(b: &mut Builder, group: i64, leaves: Vec<(usize, i8)>) -> Option<(usize, i8, u32)> {
    let mut prev: Option<(usize, u32)> = None;
    for (acc, sign) in leaves {
        let stage = prev.map_or(2, |(_, s)| s + 1);
        let node = b.node(NodeKind::Mac, group, stage);
        if let Some((p, _)) = prev {
            b.edge(p, node, 1);
        }
        b.edge(acc, node, sign);
        prev = Some((node, stage));
    }
    prev.map(|(n, s)| (n, 1, s))
}

/// Output delay in cycles relative to the direct form, per output.
///
/// Pyramid mode registers every adder level, so an output is delayed by the
/// number of `add`/`sub` nodes on its longest input path. MAC chains run at
/// the direct form's latency.
pub fn latency_of(graph: &DataflowGraph) -> Vec<u32> {
    let outputs = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Output)
        .map(|n| n.id);
    if graph.meta.mode == CostMode::Mac {
        return outputs.map(|_| 0).collect();
    }
    let order = match topo_order(graph) {
        Ok(o) => o,
        Err(_) => return outputs.map(|_| 0).collect(),
    };
    let mut inputs = vec![Vec::new(); graph.nodes.len()];
    for e in &graph.edges {
        inputs[e.dst].push(e.src);
    }
    let mut depth = vec![0u32; graph.nodes.len()];
    for id in order {
        let below = inputs[id].iter().map(|&s| depth[s]).max().unwrap_or(0);
        depth[id] = below + u32::from(graph.nodes[id].kind.is_tree());
    }
    outputs.map(|id| depth[id]).collect()
}

/// Kahn order; fails on cycles or dangling edges.
fn topo_order(graph: &DataflowGraph) -> Result<Vec<usize>> {
    let n = graph.nodes.len();
    let mut indegree = vec![0usize; n];
    let mut fanout = vec![Vec::new(); n];
    for e in &graph.edges {
        if e.src >= n || e.dst >= n {
            return Err(Error::MalformedGraph(format!(
                "edge {} -> {} references a missing node",
                e.src, e.dst
            )));
        }
        indegree[e.dst] += 1;
        fanout[e.src].push(e.dst);
    }
    let mut ready: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(id) = ready.pop_front() {
        order.push(id);
        for &d in &fanout[id] {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.push_back(d);
            }
        }
    }
    if order.len() != n {
        return Err(Error::MalformedGraph("graph has a cycle".into()));
    }
    Ok(order)
}

impl DataflowGraph {
    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Ids of the output nodes, in bank order.
    pub fn outputs(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Output)
            .map(|n| n.id)
            .collect()
    }

    /// Operation counts read off the graph, in the same shape as
    /// [`crate::cost::actual_cost`].
    pub fn op_counts(&self) -> CostReport {
        let kinds: Vec<NodeKind> = self.nodes.iter().map(|n| n.kind).collect();
        let inner = self
            .edges
            .iter()
            .filter(|e| kinds[e.dst] == NodeKind::SubsetAcc)
            .count() as u64;
        let macs = self.count(NodeKind::Mac) as u64;
        let adds = (self.count(NodeKind::Add) + self.count(NodeKind::Sub)) as u64;
        CostReport {
            kind: CostKind::Actual,
            mode: self.meta.mode,
            filters: self.meta.filters,
            taps: self.meta.taps,
            groups: self.meta.groups as u64,
            inner_macs: inner,
            outer_macs: macs,
            outer_adds: adds,
            total_macs: inner + macs,
            total_ops: inner + macs + adds,
            inner_rate: 1,
            outer_rate: 1,
        }
    }

    /// Structural checks used after import.
    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::MalformedGraph(format!(
                    "node ids must be dense from 0, found {} at position {i}",
                    n.id
                )));
            }
        }
        topo_order(self)?;
        if let Some(e) = self.edges.iter().find(|e| e.sign != 1 && e.sign != -1) {
            return Err(Error::MalformedGraph(format!("edge sign {}", e.sign)));
        }
        if self.count(NodeKind::Tap) != self.meta.taps {
            return Err(Error::MalformedGraph(format!(
                "{} tap nodes for M = {}",
                self.count(NodeKind::Tap),
                self.meta.taps
            )));
        }
        if self.count(NodeKind::Output) != self.meta.filters {
            return Err(Error::MalformedGraph(format!(
                "{} output nodes for K = {}",
                self.count(NodeKind::Output),
                self.meta.filters
            )));
        }
        if self.latency.len() != self.meta.filters {
            return Err(Error::MalformedGraph(
                "latency length differs from K".into(),
            ));
        }
        Ok(())
    }

    /// Runs a signal through the graph with exact integer arithmetic.
    ///
    /// Tap `i` reads `x[n-i]` from a zeroed delay line; every other node sums
    /// its signed inputs.
    pub fn evaluate(&self, signal: &SignalFrame) -> Result<OutputFrame> {
        check_headroom(self.meta.taps, signal.sample_width())?;
        let order = topo_order(self)?;
        let mut inputs: Vec<Vec<(usize, i64)>> = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            inputs[e.dst].push((e.src, e.sign as i64));
        }
        let tap_index: Vec<Option<usize>> = {
            let mut next = 0;
            self.nodes
                .iter()
                .map(|n| {
                    (n.kind == NodeKind::Tap).then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        };
        let outputs = self.outputs();
        let x = signal.samples();
        let mut value = vec![0i64; self.nodes.len()];
        let mut streams = vec![Vec::with_capacity(x.len()); outputs.len()];
        for n in 0..x.len() {
            for &id in &order {
                value[id] = match tap_index[id] {
                    Some(i) => n.checked_sub(i).map_or(0, |t| x[t]),
                    None => inputs[id].iter().map(|&(s, sign)| sign * value[s]).sum(),
                };
            }
            for (stream, &id) in streams.iter_mut().zip(&outputs) {
                stream.push(value[id]);
            }
        }
        OutputFrame::from_outputs(streams)
    }
}

/// Serializes a graph as pretty-printed JSON with keys `meta`, `nodes`,
/// `edges`, `latency` in that order.
pub fn export_graph(graph: &DataflowGraph) -> String {
    let mut s = serde_json::to_string_pretty(graph).expect("graph serialization cannot fail");
    s.push('\n');
    s
}

pub fn import_graph(text: &str) -> Result<DataflowGraph> {
    let graph: DataflowGraph =
        serde_json::from_str(text).map_err(|e| Error::MalformedGraph(e.to_string()))?;
    graph.validate()?;
    Ok(graph)
}

/// Writes the export to `path` through a temporary file in the same
/// directory, renamed into place.
pub fn write_graph(graph: &DataflowGraph, path: &Path) -> Result<()> {
    let fail = |e: &dyn fmt::Display| Error::WriteFailure {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(export_graph(graph).as_bytes())
        .map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{plan_grouping, validate_bank};
    use crate::cost::actual_cost;
    use crate::eval::shared_evaluate;
    use crate::rng::BankRng;
    use proptest::prelude::*;

    fn example_bank() -> FilterBank {
        validate_bank(&[vec![1, -1, 1, -1], vec![1, 1, -1, -1]]).unwrap()
    }

    #[test]
    fn two_filter_pyramid() {
        let g = build_graph(
            &example_bank(),
            &plan_grouping(2, 1).unwrap(),
            CostMode::Pyramid,
        )
        .unwrap();
        assert_eq!(g.count(NodeKind::Tap), 4);
        assert_eq!(g.count(NodeKind::SubsetAcc), 4);
        assert_eq!(g.count(NodeKind::Add) + g.count(NodeKind::Sub), 6);
        assert_eq!(g.count(NodeKind::Output), 2);
        assert_eq!(g.nodes.len(), 16);
        assert_eq!(g.latency, vec![2, 2]);
        assert!(g.edges.iter().all(|e| e.src < e.dst));
        g.validate().unwrap();
    }

    #[test]
    fn passthrough() {
        let bank = validate_bank(&[vec![1]]).unwrap();
        let g = build_graph(&bank, &plan_grouping(1, 1).unwrap(), CostMode::Pyramid).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.count(NodeKind::SubsetAcc), 1);
        assert_eq!(g.latency, vec![0]);
        assert_eq!(
            g.edges,
            vec![
                Edge {
                    src: 0,
                    dst: 1,
                    sign: 1
                },
                Edge {
                    src: 1,
                    dst: 2,
                    sign: 1
                }
            ]
        );
    }

    #[test]
    fn mac_counts_on_seeded_bank() {
        let bank = FilterBank::random(8, 120, 50).unwrap();
        let plan = plan_grouping(8, 2).unwrap();
        let g = build_graph(&bank, &plan, CostMode::Mac).unwrap();
        let parts = partition_grouped(&bank, &plan).unwrap();
        let cost = actual_cost(&parts, &plan, CostMode::Mac).unwrap();
        assert_eq!(g.count(NodeKind::Mac) as u64, cost.outer_macs);
        assert!(cost.outer_macs <= 128);
        assert_eq!(g.op_counts().inner_macs, 240);
        assert_eq!(g.op_counts(), cost);
        assert!(g.latency.iter().all(|&l| l == 0));
    }

    #[test]
    fn pyramid_latency_matches_log2() {
        for n in 1usize..=256 {
            let mut b = Builder {
                nodes: vec![],
                edges: vec![],
            };
            let leaves: Vec<(usize, i8)> = (0..n)
                .map(|_| (b.node(NodeKind::SubsetAcc, 0, 1), 1))
                .collect();
            let root = pyramid(&mut b, 0, leaves).unwrap();
            let expected = (n as f64).log2().ceil() as u32;
            assert_eq!(root.2 - 1, expected, "n = {n}");
            assert_eq!(b.nodes.len(), 2 * n - 1);
        }
    }

    #[test]
    fn pyramid_pipeline_depths() {
        let bank = FilterBank::random(8, 120, 50).unwrap();
        let g = build_graph(&bank, &plan_grouping(8, 2).unwrap(), CostMode::Pyramid).unwrap();
        assert_eq!(latency_of(&g), vec![4; 8]);
        let bank = FilterBank::random(6, 60, 50).unwrap();
        let g = build_graph(&bank, &plan_grouping(6, 2).unwrap(), CostMode::Pyramid).unwrap();
        assert_eq!(latency_of(&g), vec![3; 6]);
    }

    #[test]
    fn export_round_trip() {
        let g = build_graph(
            &example_bank(),
            &plan_grouping(2, 1).unwrap(),
            CostMode::Pyramid,
        )
        .unwrap();
        let text = export_graph(&g);
        assert_eq!(
            text,
            export_graph(
                &build_graph(
                    &example_bank(),
                    &plan_grouping(2, 1).unwrap(),
                    CostMode::Pyramid
                )
                .unwrap()
            )
        );
        let back = import_graph(&text).unwrap();
        assert_eq!(back, g);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 16);
        assert_eq!(v["meta"]["mode"], "pyramid");
        let keys: Vec<&str> = ["\"meta\"", "\"nodes\"", "\"edges\"", "\"latency\""]
            .into_iter()
            .collect();
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        let meta_keys: Vec<usize> = ["\"K\"", "\"M\"", "\"G\"", "\"mode\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(meta_keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn import_rejects_broken_graphs() {
        let g = build_graph(
            &example_bank(),
            &plan_grouping(2, 2).unwrap(),
            CostMode::Mac,
        )
        .unwrap();
        let mut cyclic = g.clone();
        let back = *g
            .edges
            .iter()
            .find(|e| g.nodes[e.src].kind == NodeKind::SubsetAcc)
            .unwrap();
        cyclic.edges.push(Edge {
            src: back.dst,
            dst: back.src,
            sign: 1,
        });
        assert!(matches!(
            import_graph(&export_graph(&cyclic)),
            Err(Error::MalformedGraph(_))
        ));
        let mut sparse = g.clone();
        sparse.nodes[3].id = 99;
        assert!(import_graph(&export_graph(&sparse)).is_err());
        let mut dangling = g.clone();
        dangling.edges.push(Edge {
            src: 0,
            dst: 500,
            sign: 1,
        });
        assert!(import_graph(&export_graph(&dangling)).is_err());
        assert!(import_graph("{not json").is_err());
    }

    #[test]
    fn write_is_atomic_and_reports_failures() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let g = build_graph(
            &example_bank(),
            &plan_grouping(2, 1).unwrap(),
            CostMode::Mac,
        )
        .unwrap();
        write_graph(&g, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), export_graph(&g));
        let bad = dir.path().join("missing").join("g.json");
        assert!(matches!(
            write_graph(&g, &bad),
            Err(Error::WriteFailure { .. })
        ));
    }

    #[test]
    fn padded_polyphase_bank_graph() {
        let spec = crate::poly::polyphase_decompose(&[1, 1, -1, 1, -1], 3).unwrap();
        let plan = plan_grouping(3, 1).unwrap();
        let g = build_graph(spec.subfilters(), &plan, CostMode::Pyramid).unwrap();
        let parts = partition_grouped(spec.subfilters(), &plan).unwrap();
        assert_eq!(
            g.op_counts(),
            actual_cost(&parts, &plan, CostMode::Pyramid).unwrap()
        );
        let x = SignalFrame::from_samples(vec![3, -1, 4, 1, -5, 9]).unwrap();
        assert_eq!(
            g.evaluate(&x).unwrap(),
            shared_evaluate(spec.subfilters(), &plan, &x).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn graph_agrees_with_cost_and_semantics(k in 1usize..=8, m in 1usize..=64, g in 1usize..=8, seed in any::<u64>(), pyramid in any::<bool>()) {
            let g = g.min(k);
            let mode = if pyramid { CostMode::Pyramid } else { CostMode::Mac };
            let bank = FilterBank::random(k, m, seed).unwrap();
            let plan = plan_grouping(k, g).unwrap();
            let graph = build_graph(&bank, &plan, mode).unwrap();
            let parts = partition_grouped(&bank, &plan).unwrap();
            prop_assert_eq!(graph.op_counts(), actual_cost(&parts, &plan, mode).unwrap());
            for grp in 0..g as i64 {
                let accs: Vec<usize> = graph.nodes.iter().filter(|n| n.kind == NodeKind::SubsetAcc && n.group == grp).map(|n| n.id).collect();
                let into = graph.edges.iter().filter(|e| accs.contains(&e.dst)).count();
                prop_assert_eq!(into, m);
            }
            let mut rng = BankRng::new(seed ^ 1);
            let x = SignalFrame::from_samples(rng.samples(2 * m, 16)).unwrap();
            prop_assert_eq!(graph.evaluate(&x).unwrap(), shared_evaluate(&bank, &plan, &x).unwrap());
            if mode == CostMode::Pyramid {
                for (filter, &lat) in graph.latency.iter().enumerate() {
                    let (grp, _) = plan.locate()[filter];
                    let n = parts[grp].len() as f64;
                    prop_assert_eq!(lat, n.log2().ceil() as u32);
                }
            }
            prop_assert_eq!(import_graph(&export_graph(&graph)).unwrap(), graph);
        }
    }
}
