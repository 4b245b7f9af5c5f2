//! Evaluates placed service graphs into [`CostBreakdown`]s.
//!
//! Every term (one stage on one node, one edge between two nodes) is
//! computed once by [`CostTable`] and all totals are summed in a fixed
//! canonical order: stage terms in graph order split into the dt and ml
//! buckets, then edge terms in edge order, then `dt + ml + dc`. The same
//! placement therefore always produces bit-identical numbers, whether it is
//! reached by [`evaluate`] or by the optimizer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_graph, CostBreakdown, Link, Microservice, Node, Placement, ServiceGraph, Stage,
    Topology, BYTES_PER_MB,
};
use crate::placement::{check_feasible, FeasibilityReport, Residency, ViolationKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingSemantics {
    /// Total is the plain sum of all stage and transfer times.
    #[default]
    Sequential,
    /// Total is the longest stage-plus-transfer path through the DAG.
    CriticalPath,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("graph `{graph}` is invalid: {detail}")]
    InvalidGraph { graph: String, detail: String },
    #[error("placement is infeasible: {}", summarize(.0))]
    InfeasiblePlacement(FeasibilityReport),
    #[error("no link carries edge {from_ms} -> {to_ms} ({from_node} -> {to_node})")]
    MissingLink {
        from_ms: String,
        to_ms: String,
        from_node: String,
        to_node: String,
    },
}

fn summarize(report: &FeasibilityReport) -> String {
    report
        .violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Seconds to move `size_mb` across `link`.
pub fn transfer_time(size_mb: f64, link: &Link) -> f64 {
    size_mb * 8.0 / link.bandwidth_mbps + link.latency_s
}

/// Seconds for `ms` to process `input_mb` on `node`.
pub fn stage_time(ms: &Microservice, node: &Node, input_mb: f64) -> f64 {
    (ms.work.fixed_seconds + ms.work.seconds_per_mb * input_mb) / node.speed_factor
}

/// Data volume entering and leaving one stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub input_mb: f64,
    pub output_mb: f64,
}

/// Per-stage data volumes, evaluated in topological order. Sources take
/// `source_size_mb` as input and emit according to their data profile.
pub fn propagate_sizes(graph: &ServiceGraph) -> Result<BTreeMap<String, Flow>, CostError> {
    let flows = flows_by_index(graph)?;
    Ok(graph
        .microservices
        .iter()
        .zip(flows)
        .map(|(m, f)| (m.id.clone(), f))
        .collect())
}

fn flows_by_index(graph: &ServiceGraph) -> Result<Vec<Flow>, CostError> {
    let order = graph
        .topological_order()
        .ok_or_else(|| CostError::InvalidGraph {
            graph: graph.id.clone(),
            detail: "edges reference unknown stages or form a cycle".into(),
        })?;
    let index: BTreeMap<&str, usize> = graph
        .microservices
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.as_str(), i))
        .collect();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); graph.microservices.len()];
    for e in &graph.edges {
        incoming[index[e.to.as_str()]].push(index[e.from.as_str()]);
    }
    let mut flows = vec![Flow::default(); graph.microservices.len()];
    for i in order {
        let ms = &graph.microservices[i];
        let input_mb = if ms.stage == Stage::Source {
            graph.source_size_mb
        } else {
            incoming[i]
                .iter()
                .fold(0.0, |acc, &p| acc + flows[p].output_mb)
        };
        flows[i] = Flow {
            input_mb,
            output_mb: ms.data_out.output_mb(input_mb),
        };
    }
    Ok(flows)
}

/// Precomputed stage and transfer times of one graph over one topology.
#[derive(Debug, Clone)]
pub struct CostTable {
    node_count: usize,
    /// Topological order of stage indices.
    order: Vec<usize>,
    /// `(from, to)` stage indices per edge, in graph edge order.
    edges: Vec<(usize, usize)>,
    /// Incoming edge indices per stage.
    incoming: Vec<Vec<usize>>,
    is_learn: Vec<bool>,
    flows: Vec<Flow>,
    /// `stage_secs[stage * node_count + node]`
    stage_secs: Vec<f64>,
    /// `transfer_secs[edge][from_node * node_count + to_node]`; `None`
    /// where no link exists. Same-node entries are `Some(0.0)`.
    transfer_secs: Vec<Vec<Option<f64>>>,
    edge_bytes: Vec<f64>,
}

/// Which terms a canonical sum includes.
struct Selection<'a> {
    stages: &'a [bool],
    edges: &'a [bool],
}

impl CostTable {
    /// Fails if the graph has unknown edge endpoints or a cycle.
    pub fn new(graph: &ServiceGraph, topology: &Topology) -> Result<Self, CostError> {
        let flows = flows_by_index(graph)?;
        let order = graph
            .topological_order()
            .expect("checked by flows_by_index");
        let index: BTreeMap<&str, usize> = graph
            .microservices
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.as_str(), i))
            .collect();
        let n = topology.nodes.len();
        let edges: Vec<(usize, usize)> = graph
            .edges
            .iter()
            .map(|e| (index[e.from.as_str()], index[e.to.as_str()]))
            .collect();
        let mut incoming = vec![Vec::new(); graph.microservices.len()];
        for (k, &(_, t)) in edges.iter().enumerate() {
            incoming[t].push(k);
        }

        let mut stage_secs = Vec::with_capacity(graph.microservices.len() * n);
        for (ms, flow) in graph.microservices.iter().zip(&flows) {
            for node in &topology.nodes {
                stage_secs.push(stage_time(ms, node, flow.input_mb));
            }
        }

        let transfer_secs = edges
            .iter()
            .map(|&(f, _)| {
                let size = flows[f].output_mb;
                let mut row = vec![None; n * n];
                for a in 0..n {
                    row[a * n + a] = Some(0.0);
                }
                for link in &topology.links {
                    if let (Some(a), Some(b)) = (
                        topology.node_index(&link.from),
                        topology.node_index(&link.to),
                    ) {
                        if a != b {
                            row[a * n + b] = Some(transfer_time(size, link));
                        }
                    }
                }
                row
            })
            .collect();
        let edge_bytes = edges
            .iter()
            .map(|&(f, _)| flows[f].output_mb * BYTES_PER_MB)
            .collect();

        Ok(CostTable {
            node_count: n,
            order,
            edges,
            incoming,
            is_learn: graph
                .microservices
                .iter()
                .map(|m| m.stage == Stage::Learn)
                .collect(),
            flows,
            stage_secs,
            transfer_secs,
            edge_bytes,
        })
    }

    pub fn stage_count(&self) -> usize {
        self.is_learn.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn incoming(&self, stage: usize) -> &[usize] {
        &self.incoming[stage]
    }

    pub fn is_learn(&self, stage: usize) -> bool {
        self.is_learn[stage]
    }

    pub fn stage_secs(&self, stage: usize, node: usize) -> f64 {
        self.stage_secs[stage * self.node_count + node]
    }

    /// `None` when the nodes differ and no link joins them.
    pub fn transfer_secs(&self, edge: usize, from_node: usize, to_node: usize) -> Option<f64> {
        self.transfer_secs[edge][from_node * self.node_count + to_node]
    }

    pub fn edge_bytes(&self, edge: usize) -> f64 {
        self.edge_bytes[edge]
    }

    /// First edge (by edge order) that crosses nodes without a link.
    pub fn missing_link(&self, assign: &[usize]) -> Option<usize> {
        (0..self.edges.len()).find(|&k| {
            let (f, t) = self.edges[k];
            self.transfer_secs(k, assign[f], assign[t]).is_none()
        })
    }

    fn canonical(&self, assign: &[usize], sel: Selection<'_>) -> (f64, f64, f64) {
        let mut dt = 0.0;
        let mut ml = 0.0;
        for (s, &node) in assign.iter().enumerate() {
            if !sel.stages[s] {
                continue;
            }
            let secs = self.stage_secs(s, node);
            if self.is_learn[s] {
                ml += secs;
            } else {
                dt += secs;
            }
        }
        let mut dc = 0.0;
        for (k, &(f, t)) in self.edges.iter().enumerate() {
            if sel.edges[k] && assign[f] != assign[t] {
                dc += self
                    .transfer_secs(k, assign[f], assign[t])
                    .unwrap_or(f64::INFINITY);
            }
        }
        (dt, ml, dc)
    }

    /// Full breakdown of the placement `assign` (node index per stage).
    ///
    /// Panics if `assign` has the wrong length. Edges without a link count
    /// as infinite time; callers check [`CostTable::missing_link`] first.
    pub fn breakdown(&self, assign: &[usize], semantics: TimingSemantics) -> CostBreakdown {
        assert_eq!(assign.len(), self.stage_count(), "assignment length");
        let all_stages = vec![true; self.stage_count()];
        let all_edges = vec![true; self.edges.len()];
        let (dt, ml, dc) = self.canonical(
            assign,
            Selection {
                stages: &all_stages,
                edges: &all_edges,
            },
        );
        let dc_bytes = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, &(f, t))| assign[f] != assign[t])
            .fold(0.0, |acc, (k, _)| acc + self.edge_bytes[k]);
        let total_seconds = match semantics {
            TimingSemantics::Sequential => dt + ml + dc,
            TimingSemantics::CriticalPath => self.critical_path(assign),
        };
        CostBreakdown {
            dt_seconds: dt,
            ml_seconds: ml,
            dc_seconds: dc,
            total_seconds,
            dc_bytes,
        }
    }

    /// Length of the longest stage-plus-transfer path, re-summed over that
    /// path's terms in canonical order.
    pub fn critical_path(&self, assign: &[usize]) -> f64 {
        let n = self.stage_count();
        if n == 0 {
            return 0.0;
        }
        let mut finish = vec![0.0f64; n];
        let mut via: Vec<Option<usize>> = vec![None; n];
        for &s in &self.order {
            let mut start = 0.0;
            for &k in &self.incoming[s] {
                let (f, _) = self.edges[k];
                let t = if assign[f] == assign[s] {
                    0.0
                } else {
                    self.transfer_secs(k, assign[f], assign[s])
                        .unwrap_or(f64::INFINITY)
                };
                let ready = finish[f] + t;
                if via[s].is_none() || ready > start {
                    start = ready;
                    via[s] = Some(k);
                }
            }
            finish[s] = start + self.stage_secs(s, assign[s]);
        }

        let mut end = self.order[0];
        for &s in &self.order {
            if finish[s] > finish[end] {
                end = s;
            }
        }
        let mut on_path = vec![false; n];
        let mut edge_on_path = vec![false; self.edges.len()];
        let mut cur = end;
        loop {
            on_path[cur] = true;
            match via[cur] {
                Some(k) => {
                    edge_on_path[k] = true;
                    cur = self.edges[k].0;
                }
                None => break,
            }
        }
        let (dt, ml, dc) = self.canonical(
            assign,
            Selection {
                stages: &on_path,
                edges: &edge_on_path,
            },
        );
        dt + ml + dc
    }
}

/// Resolves a placement to node indices, in graph stage order.
pub(crate) fn assignment_indices(
    graph: &ServiceGraph,
    placement: &Placement,
    topology: &Topology,
) -> Option<Vec<usize>> {
    graph
        .microservices
        .iter()
        .map(|m| {
            placement
                .node_of(&m.id)
                .and_then(|n| topology.node_index(n))
        })
        .collect()
}

/// Evaluates a placed graph. Feasibility is re-checked; a placement whose
/// only problems are missing links yields [`CostError::MissingLink`].
pub fn evaluate(
    graph: &ServiceGraph,
    placement: &Placement,
    topology: &Topology,
    semantics: TimingSemantics,
    residency: Residency,
) -> Result<CostBreakdown, CostError> {
    let report = validate_graph(graph);
    if let Some(v) = report.violations.first() {
        return Err(CostError::InvalidGraph {
            graph: graph.id.clone(),
            detail: v.to_string(),
        });
    }
    let feasibility = check_feasible(placement, graph, topology, residency);
    if !feasibility.feasible {
        let first_non_link = feasibility
            .violations
            .iter()
            .find(|v| !matches!(v.kind, ViolationKind::MissingLink { .. }));
        if first_non_link.is_none() {
            let v = &feasibility.violations[0];
            if let ViolationKind::MissingLink { from_ms, to_ms } = &v.kind {
                return Err(CostError::MissingLink {
                    from_ms: from_ms.clone(),
                    to_ms: to_ms.clone(),
                    from_node: placement.node_of(from_ms).unwrap_or_default().to_string(),
                    to_node: placement.node_of(to_ms).unwrap_or_default().to_string(),
                });
            }
        }
        return Err(CostError::InfeasiblePlacement(feasibility));
    }
    let table = CostTable::new(graph, topology)?;
    let assign = assignment_indices(graph, placement, topology)
        .expect("feasible placements are total over known nodes");
    Ok(table.breakdown(&assign, semantics))
}
