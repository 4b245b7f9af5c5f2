//! Constraint-aware placement search over arbitrary graphs and topologies.
//!
//! Placements are compared by objective value, then lexicographically by
//! their assignment vector (stages ordered by microservice id, entries
//! compared by node id). The exhaustive search visits candidates in exactly
//! that order and only accepts strict improvements, so the first optimum it
//! meets is the tie-break winner.
//!
//! The exhaustive search runs each candidate of the first stage as an
//! independent subtree seeded with the greedy bound. Serial and parallel
//! runs therefore do identical work and return identical results.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, CostTable, TimingSemantics};
use crate::model::{validate_graph, CostBreakdown, Placement, ServiceGraph, Topology};
use crate::placement::{node_load, Residency};

/// Upper bound on `stages * log2(nodes)` accepted by the exhaustive search.
pub const SEARCH_SPACE_BITS: f64 = 40.0;

/// Relative slack applied before pruning on a floating-point lower bound.
const PRUNE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    #[default]
    TotalTimeSequential,
    TotalTimeCriticalPath,
    DcBytes,
}

impl Objective {
    /// Timing semantics used for the reported breakdown.
    pub fn semantics(self) -> TimingSemantics {
        match self {
            Objective::TotalTimeCriticalPath => TimingSemantics::CriticalPath,
            _ => TimingSemantics::Sequential,
        }
    }

    pub fn value_of(self, cost: &CostBreakdown) -> f64 {
        match self {
            Objective::DcBytes => cost.dc_bytes,
            _ => cost.total_seconds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub placement: Placement,
    pub cost: CostBreakdown,
    pub objective_value: f64,
    pub method: Method,
    pub nodes_explored: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("graph `{graph}` is invalid: {detail}")]
    InvalidGraph { graph: String, detail: String },
    #[error("pin `{ms_id}` -> `{node_id}` references an unknown stage or node")]
    UnknownPin { ms_id: String, node_id: String },
    #[error("no feasible placement exists")]
    NoFeasiblePlacement,
    #[error("greedy search found no feasible node for stage `{stage}`")]
    GreedyDeadEnd { stage: String },
    #[error(
        "search space too large: {stages} stages over {nodes} nodes exceeds 2^{}; use the greedy method",
        SEARCH_SPACE_BITS
    )]
    SearchSpaceTooLarge { stages: usize, nodes: usize },
}

impl From<CostError> for OptimizeError {
    fn from(e: CostError) -> Self {
        match e {
            CostError::InvalidGraph { graph, detail } => {
                OptimizeError::InvalidGraph { graph, detail }
            }
            other => OptimizeError::InvalidGraph {
                graph: String::new(),
                detail: other.to_string(),
            },
        }
    }
}

/// One placement search instance.
#[derive(Debug, Clone)]
pub struct PlacementProblem<'a> {
    pub graph: &'a ServiceGraph,
    pub topology: &'a Topology,
    pub objective: Objective,
    pub residency: Residency,
    /// Stages whose node is fixed in advance, e.g. data sources.
    pub pins: BTreeMap<String, String>,
}

impl<'a> PlacementProblem<'a> {
    pub fn new(graph: &'a ServiceGraph, topology: &'a Topology, objective: Objective) -> Self {
        PlacementProblem {
            graph,
            topology,
            objective,
            residency: Residency::Sum,
            pins: BTreeMap::new(),
        }
    }

    pub fn with_residency(mut self, residency: Residency) -> Self {
        self.residency = residency;
        self
    }

    pub fn pin(mut self, ms_id: impl Into<String>, node_id: impl Into<String>) -> Self {
        self.pins.insert(ms_id.into(), node_id.into());
        self
    }
}

/// Search state shared by both methods.
struct Prepared<'a> {
    problem: &'a PlacementProblem<'a>,
    table: CostTable,
    /// Feasible nodes per stage on their own, ascending by node id.
    candidates: Vec<Vec<usize>>,
    /// Edges touching each stage: `(edge index, other stage)`.
    adjacent: Vec<Vec<(usize, usize)>>,
}

impl<'a> Prepared<'a> {
    fn new(problem: &'a PlacementProblem<'a>) -> Result<Self, OptimizeError> {
        let graph = problem.graph;
        let topology = problem.topology;
        if let Some(v) = validate_graph(graph).violations.first() {
            return Err(OptimizeError::InvalidGraph {
                graph: graph.id.clone(),
                detail: v.to_string(),
            });
        }
        for (ms_id, node_id) in &problem.pins {
            if graph.microservice(ms_id).is_none() || topology.node(node_id).is_none() {
                return Err(OptimizeError::UnknownPin {
                    ms_id: ms_id.clone(),
                    node_id: node_id.clone(),
                });
            }
        }
        let table = CostTable::new(graph, topology)?;

        let mut nodes_by_id: Vec<usize> = (0..topology.nodes.len()).collect();
        nodes_by_id.sort_by(|&a, &b| topology.nodes[a].id.cmp(&topology.nodes[b].id));

        let candidates = graph
            .microservices
            .iter()
            .map(|ms| {
                nodes_by_id
                    .iter()
                    .copied()
                    .filter(|&n| {
                        let node = &topology.nodes[n];
                        problem.pins.get(&ms.id).is_none_or(|p| *p == node.id)
                            && ms.demand.fits(&node.capacity)
                            && ms.required_capabilities.is_subset(&node.capabilities)
                    })
                    .collect()
            })
            .collect();

        let mut adjacent = vec![Vec::new(); graph.microservices.len()];
        for (k, &(f, t)) in table.edges().iter().enumerate() {
            adjacent[f].push((k, t));
            adjacent[t].push((k, f));
        }

        Ok(Prepared {
            problem,
            table,
            candidates,
            adjacent,
        })
    }

    fn objective_value(&self, assign: &[usize]) -> (f64, CostBreakdown) {
        let cost = self
            .table
            .breakdown(assign, self.problem.objective.semantics());
        (self.problem.objective.value_of(&cost), cost)
    }

    fn result(&self, assign: &[usize], method: Method, nodes_explored: u64) -> OptimizeResult {
        let (objective_value, cost) = self.objective_value(assign);
        let topology = self.problem.topology;
        let placement = self
            .problem
            .graph
            .microservices
            .iter()
            .zip(assign)
            .map(|(m, &n)| (m.id.clone(), topology.nodes[n].id.clone()))
            .collect();
        OptimizeResult {
            placement,
            cost,
            objective_value,
            method,
            nodes_explored,
        }
    }

    /// Whether `s` may go on `node` given the stages already in `assign`
    /// (`usize::MAX` = unassigned). Node load is summed in graph order,
    /// exactly as [`check_feasible`](crate::placement::check_feasible) does.
    fn admissible(&self, s: usize, node: usize, assign: &[usize]) -> bool {
        let graph = self.problem.graph;
        let demands = graph
            .microservices
            .iter()
            .enumerate()
            .filter(|&(i, _)| i == s || assign[i] == node)
            .map(|(_, m)| &m.demand);
        let capacity = &self.problem.topology.nodes[node].capacity;
        if !node_load(demands, self.problem.residency).fits(capacity) {
            return false;
        }
        self.adjacent[s].iter().all(|&(k, other)| {
            let o = assign[other];
            if o == usize::MAX || o == node {
                return true;
            }
            let (f, _) = self.table.edges()[k];
            let (a, b) = if f == s { (node, o) } else { (o, node) };
            self.table.transfer_secs(k, a, b).is_some()
        })
    }
}

fn slack(value: f64) -> f64 {
    value + PRUNE_SLACK * value.abs().max(1e-12)
}

/// Greedy placement in topological order; see the module docs for ties.
pub fn optimize_greedy(problem: &PlacementProblem<'_>) -> Result<OptimizeResult, OptimizeError> {
    let prep = Prepared::new(problem)?;
    greedy(&prep)
}

fn greedy_order(graph: &ServiceGraph) -> Vec<usize> {
    let n = graph.microservices.len();
    let index: BTreeMap<&str, usize> = graph
        .microservices
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.as_str(), i))
        .collect();
    let mut indegree = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for e in &graph.edges {
        let (f, t) = (index[e.from.as_str()], index[e.to.as_str()]);
        succ[f].push(t);
        indegree[t] += 1;
    }
    let mut ready: BTreeSet<(&str, usize)> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| (graph.microservices[i].id.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, i)) = ready.pop_first() {
        order.push(i);
        for &t in &succ[i] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                ready.insert((graph.microservices[t].id.as_str(), t));
            }
        }
    }
    order
}

fn greedy(prep: &Prepared<'_>) -> Result<OptimizeResult, OptimizeError> {
    let table = &prep.table;
    let n_stages = table.stage_count();
    let mut assign = vec![usize::MAX; n_stages];
    let mut finish = vec![0.0f64; n_stages];
    let mut makespan = 0.0f64;
    let mut explored = 0u64;

    for s in greedy_order(prep.problem.graph) {
        let mut best: Option<(f64, usize, f64)> = None;
        for &node in &prep.candidates[s] {
            if !prep.admissible(s, node, &assign) {
                continue;
            }
            explored += 1;
            let mut transfer = 0.0;
            let mut bytes = 0.0;
            let mut ready = 0.0f64;
            for &k in table.incoming(s) {
                let (f, _) = table.edges()[k];
                let t = table
                    .transfer_secs(k, assign[f], node)
                    .expect("checked by admissible");
                if assign[f] != node {
                    transfer += t;
                    bytes += table.edge_bytes(k);
                }
                ready = ready.max(finish[f] + t);
            }
            let done = ready + table.stage_secs(s, node);
            let marginal = match prep.problem.objective {
                Objective::TotalTimeSequential => table.stage_secs(s, node) + transfer,
                Objective::TotalTimeCriticalPath => (done - makespan).max(0.0),
                Objective::DcBytes => bytes,
            };
            if best.is_none_or(|(m, _, _)| marginal < m) {
                best = Some((marginal, node, done));
            }
        }
        let Some((_, node, done)) = best else {
            return Err(OptimizeError::GreedyDeadEnd {
                stage: prep.problem.graph.microservices[s].id.clone(),
            });
        };
        assign[s] = node;
        finish[s] = done;
        makespan = makespan.max(done);
    }
    Ok(prep.result(&assign, Method::Greedy, explored))
}

/// Exact minimum over all feasible placements, by branch and bound.
pub fn optimize_exhaustive(
    problem: &PlacementProblem<'_>,
) -> Result<OptimizeResult, OptimizeError> {
    exhaustive(problem, false)
}

/// Same as [`optimize_exhaustive`], with first-stage subtrees searched in
/// parallel. Returns an identical result.
pub fn optimize_exhaustive_parallel(
    problem: &PlacementProblem<'_>,
) -> Result<OptimizeResult, OptimizeError> {
    exhaustive(problem, true)
}

struct Subtree {
    best: Option<(f64, Vec<usize>)>,
    explored: u64,
}

struct Search<'p, 'a> {
    prep: &'p Prepared<'a>,
    /// Stage indices ascending by microservice id.
    order: Vec<usize>,
    /// `min_rest[d]`: lower bound on stage time for `order[d..]`.
    min_rest: Vec<f64>,
    min_secs: Vec<f64>,
    bound: f64,
}

impl Search<'_, '_> {
    fn run_subtree(&self, first: usize) -> Subtree {
        let n = self.order.len();
        let mut state = SubtreeState {
            assign: vec![usize::MAX; n],
            threshold: self.bound,
            best: None,
            explored: 0,
        };
        self.descend(&mut state, 0, first, 0.0, 0.0);
        Subtree {
            best: state.best,
            explored: state.explored,
        }
    }

    fn lower_bound(
        &self,
        state: &SubtreeState,
        depth: usize,
        partial_secs: f64,
        partial_bytes: f64,
    ) -> f64 {
        match self.prep.problem.objective {
            Objective::TotalTimeSequential => partial_secs + self.min_rest[depth],
            Objective::DcBytes => partial_bytes,
            Objective::TotalTimeCriticalPath => self.path_bound(&state.assign),
        }
    }

    /// Longest path using placed times where known and cheapest times
    /// elsewhere; transfers only count between two placed stages.
    fn path_bound(&self, assign: &[usize]) -> f64 {
        let table = &self.prep.table;
        let mut finish = vec![0.0f64; assign.len()];
        let mut longest = 0.0f64;
        for &s in table.topological_order() {
            let mut start = 0.0f64;
            for &k in table.incoming(s) {
                let (f, _) = table.edges()[k];
                let t = if assign[f] != usize::MAX && assign[s] != usize::MAX {
                    table.transfer_secs(k, assign[f], assign[s]).unwrap_or(0.0)
                } else {
                    0.0
                };
                start = start.max(finish[f] + t);
            }
            let own = if assign[s] == usize::MAX {
                self.min_secs[s]
            } else {
                table.stage_secs(s, assign[s])
            };
            finish[s] = start + own;
            longest = longest.max(finish[s]);
        }
        longest
    }

    fn descend(&self, state: &mut SubtreeState, depth: usize, node: usize, secs: f64, bytes: f64) {
        let s = self.order[depth];
        let prep = self.prep;
        if !prep.admissible(s, node, &state.assign) {
            return;
        }
        state.explored += 1;

        let table = &prep.table;
        let mut secs = secs + table.stage_secs(s, node);
        let mut bytes = bytes;
        for &(k, other) in &prep.adjacent[s] {
            let o = state.assign[other];
            if o == usize::MAX || o == node {
                continue;
            }
            let (f, _) = table.edges()[k];
            let (a, b) = if f == s { (node, o) } else { (o, node) };
            secs += table.transfer_secs(k, a, b).expect("checked by admissible");
            bytes += table.edge_bytes(k);
        }

        state.assign[s] = node;

        if depth + 1 == self.order.len() {
            let (value, _) = prep.objective_value(&state.assign);
            let better = match &state.best {
                None => value <= state.threshold,
                Some((best, _)) => value < *best,
            };
            if better {
                state.threshold = value;
                state.best = Some((value, state.assign.clone()));
            }
        } else if self.lower_bound(state, depth + 1, secs, bytes) <= slack(state.threshold) {
            let next = self.order[depth + 1];
            for &candidate in &prep.candidates[next] {
                self.descend(state, depth + 1, candidate, secs, bytes);
            }
        }

        state.assign[s] = usize::MAX;
    }
}

struct SubtreeState {
    assign: Vec<usize>,
    threshold: f64,
    best: Option<(f64, Vec<usize>)>,
    explored: u64,
}

fn exhaustive(
    problem: &PlacementProblem<'_>,
    parallel: bool,
) -> Result<OptimizeResult, OptimizeError> {
    let stages = problem.graph.microservices.len();
    let nodes = problem.topology.nodes.len();
    if nodes > 1 && stages as f64 * (nodes as f64).log2() > SEARCH_SPACE_BITS {
        return Err(OptimizeError::SearchSpaceTooLarge { stages, nodes });
    }
    let prep = Prepared::new(problem)?;
    if stages == 0 {
        return Ok(prep.result(&[], Method::Exhaustive, 0));
    }
    if prep.candidates.iter().any(Vec::is_empty) {
        return Err(OptimizeError::NoFeasiblePlacement);
    }

    let bound = match greedy(&prep) {
        Ok(r) => slack(r.objective_value),
        Err(_) => f64::INFINITY,
    };

    let mut order: Vec<usize> = (0..stages).collect();
    order.sort_by(|&a, &b| {
        problem.graph.microservices[a]
            .id
            .cmp(&problem.graph.microservices[b].id)
    });
    let min_secs: Vec<f64> = (0..stages)
        .map(|s| {
            prep.candidates[s]
                .iter()
                .map(|&n| prep.table.stage_secs(s, n))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut min_rest = vec![0.0; stages + 1];
    for d in (0..stages).rev() {
        min_rest[d] = min_rest[d + 1] + min_secs[order[d]];
    }
    let search = Search {
        prep: &prep,
        order,
        min_rest,
        min_secs,
        bound,
    };

    let firsts = &prep.candidates[search.order[0]];
    let subtrees: Vec<Subtree> = if parallel {
        firsts.par_iter().map(|&n| search.run_subtree(n)).collect()
    } else {
        firsts.iter().map(|&n| search.run_subtree(n)).collect()
    };

    let explored = subtrees.iter().map(|t| t.explored).sum();
    let mut winner: Option<(f64, Vec<usize>)> = None;
    for tree in subtrees {
        if let Some((value, assign)) = tree.best {
            if winner.as_ref().is_none_or(|(w, _)| value < *w) {
                winner = Some((value, assign));
            }
        }
    }
    let (_, assign) = winner.ok_or(OptimizeError::NoFeasiblePlacement)?;
    Ok(prep.result(&assign, Method::Exhaustive, explored))
}
