//! Domain types shared by every stage of the pipeline: resources, devices,
//! links, microservices, service graphs, placements and cost breakdowns.
//!
//! Units are decimal: one MB is 10^6 bytes and one Mbps is 10^6 bits/second.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Bytes per MB.
pub const BYTES_PER_MB: f64 = 1e6;

/// One axis of a [`ResourceVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Cpu,
    RamMb,
    StorageMb,
    EnergyUnits,
    BandwidthMbps,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Cpu,
        Dimension::RamMb,
        Dimension::StorageMb,
        Dimension::EnergyUnits,
        Dimension::BandwidthMbps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Cpu => "cpu",
            Dimension::RamMb => "ram_mb",
            Dimension::StorageMb => "storage_mb",
            Dimension::EnergyUnits => "energy_units",
            Dimension::BandwidthMbps => "bandwidth_mbps",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A five-dimension nonnegative quantity used both for node capacities and
/// microservice demands. `bandwidth_mbps` here only gates feasibility;
/// transfer timing always uses [`Link::bandwidth_mbps`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceVector {
    #[serde(default)]
    pub cpu: f64,
    #[serde(default)]
    pub ram_mb: f64,
    #[serde(default)]
    pub storage_mb: f64,
    #[serde(default)]
    pub energy_units: f64,
    #[serde(default)]
    pub bandwidth_mbps: f64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector {
        cpu: 0.0,
        ram_mb: 0.0,
        storage_mb: 0.0,
        energy_units: 0.0,
        bandwidth_mbps: 0.0,
    };

    /// Every dimension set to `v`.
    pub fn splat(v: f64) -> Self {
        ResourceVector {
            cpu: v,
            ram_mb: v,
            storage_mb: v,
            energy_units: v,
            bandwidth_mbps: v,
        }
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Cpu => self.cpu,
            Dimension::RamMb => self.ram_mb,
            Dimension::StorageMb => self.storage_mb,
            Dimension::EnergyUnits => self.energy_units,
            Dimension::BandwidthMbps => self.bandwidth_mbps,
        }
    }

    pub fn with(mut self, dim: Dimension, value: f64) -> Self {
        match dim {
            Dimension::Cpu => self.cpu = value,
            Dimension::RamMb => self.ram_mb = value,
            Dimension::StorageMb => self.storage_mb = value,
            Dimension::EnergyUnits => self.energy_units = value,
            Dimension::BandwidthMbps => self.bandwidth_mbps = value,
        }
        self
    }

    pub fn components(&self) -> impl Iterator<Item = (Dimension, f64)> + '_ {
        Dimension::ALL.into_iter().map(move |d| (d, self.get(d)))
    }

    /// Dimensions that are negative or NaN.
    pub fn invalid_dimensions(&self) -> Vec<Dimension> {
        self.components()
            .filter(|(_, v)| v.is_nan() || *v < 0.0)
            .map(|(d, _)| d)
            .collect()
    }

    /// Componentwise `self <= capacity`, inclusive at the boundary.
    pub fn fits(&self, capacity: &ResourceVector) -> bool {
        resource_fits(self, capacity)
    }

    /// Dimensions where `self` exceeds `capacity`.
    pub fn exceeded(&self, capacity: &ResourceVector) -> Vec<Dimension> {
        Dimension::ALL
            .into_iter()
            .filter(|&d| !resource_fits_dim(self.get(d), capacity.get(d)))
            .collect()
    }

    pub fn add(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector {
            cpu: self.cpu + other.cpu,
            ram_mb: self.ram_mb + other.ram_mb,
            storage_mb: self.storage_mb + other.storage_mb,
            energy_units: self.energy_units + other.energy_units,
            bandwidth_mbps: self.bandwidth_mbps + other.bandwidth_mbps,
        }
    }

    /// Componentwise maximum.
    pub fn max(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector {
            cpu: self.cpu.max(other.cpu),
            ram_mb: self.ram_mb.max(other.ram_mb),
            storage_mb: self.storage_mb.max(other.storage_mb),
            energy_units: self.energy_units.max(other.energy_units),
            bandwidth_mbps: self.bandwidth_mbps.max(other.bandwidth_mbps),
        }
    }
}

/// True iff `demand <= capacity` in all five dimensions.
pub fn resource_fits(demand: &ResourceVector, capacity: &ResourceVector) -> bool {
    Dimension::ALL
        .into_iter()
        .all(|d| resource_fits_dim(demand.get(d), capacity.get(d)))
}

fn resource_fits_dim(demand: f64, capacity: f64) -> bool {
    demand <= capacity
}

/// Finite and strictly above zero; false for NaN.
pub(crate) fn is_positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Finite and at least zero; false for NaN.
pub(crate) fn is_non_negative(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Mobile,
    Drone,
    Streetlight,
    RaspberryPi,
    Cloud,
    Generic,
}

/// A compute device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub capacity: ResourceVector,
    /// Relative compute speed; the reference node is 1.0.
    pub speed_factor: f64,
    /// Installed library support, e.g. "opencv" or "sklearn".
    #[serde(default)]
    pub capabilities: BTreeSet<String>,
}

impl Node {
    pub fn new(
        id: impl Into<String>,
        kind: NodeKind,
        capacity: ResourceVector,
        speed_factor: f64,
    ) -> Self {
        Node {
            id: id.into(),
            kind,
            capacity,
            speed_factor,
            capabilities: BTreeSet::new(),
        }
    }

    pub fn with_capabilities<I, S>(mut self, caps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.capabilities.extend(caps.into_iter().map(Into::into));
        self
    }
}

/// A directed network link. Transfers between stages on the same node are
/// free and need no link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub from: String,
    pub to: String,
    pub bandwidth_mbps: f64,
    /// Fixed per-transfer overhead in seconds.
    #[serde(default)]
    pub latency_s: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub medium: String,
}

impl Link {
    pub fn new(from: impl Into<String>, to: impl Into<String>, bandwidth_mbps: f64) -> Self {
        Link {
            from: from.into(),
            to: to.into(),
            bandwidth_mbps,
            latency_s: 0.0,
            medium: String::new(),
        }
    }

    pub fn with_latency(mut self, latency_s: f64) -> Self {
        self.latency_s = latency_s;
        self
    }
}

/// A structural problem with a [`Topology`].
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyIssue {
    /// JSON-pointer style location relative to the topology.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub links: Vec<Link>,
}

impl Topology {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn link(&self, from: &str, to: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.from == from && l.to == to)
    }

    /// Checks every node, link and cross-reference invariant.
    pub fn validate(&self) -> Vec<TopologyIssue> {
        let mut issues = Vec::new();
        let mut push = |path: String, message: String| issues.push(TopologyIssue { path, message });

        let mut seen = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if !seen.insert(node.id.as_str()) {
                push(
                    format!("/nodes/{i}/id"),
                    format!("duplicate node id `{}`", node.id),
                );
            }
            if !is_positive(node.speed_factor) {
                push(
                    format!("/nodes/{i}/speed_factor"),
                    format!("speed_factor must be > 0, got {}", node.speed_factor),
                );
            }
            for dim in node.capacity.invalid_dimensions() {
                push(
                    format!("/nodes/{i}/capacity/{dim}"),
                    format!(
                        "capacity {dim} must be >= 0, got {}",
                        node.capacity.get(dim)
                    ),
                );
            }
        }

        let mut pairs = BTreeSet::new();
        for (i, link) in self.links.iter().enumerate() {
            for (field, id) in [("from", &link.from), ("to", &link.to)] {
                if !seen.contains(id.as_str()) {
                    push(
                        format!("/links/{i}/{field}"),
                        format!("unknown node `{id}`"),
                    );
                }
            }
            if link.from == link.to {
                push(
                    format!("/links/{i}/to"),
                    format!("self-link on `{}`", link.from),
                );
            }
            if !is_positive(link.bandwidth_mbps) {
                push(
                    format!("/links/{i}/bandwidth_mbps"),
                    format!("bandwidth_mbps must be > 0, got {}", link.bandwidth_mbps),
                );
            }
            if !is_non_negative(link.latency_s) {
                push(
                    format!("/links/{i}/latency_s"),
                    format!("latency_s must be >= 0, got {}", link.latency_s),
                );
            }
            if !pairs.insert((link.from.as_str(), link.to.as_str())) {
                push(
                    format!("/links/{i}"),
                    format!("second link from `{}` to `{}`", link.from, link.to),
                );
            }
        }
        issues
    }
}

/// Role of a microservice within its service graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Source,
    Transform,
    Learn,
    Join,
    Sink,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Source => "source",
            Stage::Transform => "transform",
            Stage::Learn => "learn",
            Stage::Join => "join",
            Stage::Sink => "sink",
        })
    }
}

/// Maps a stage's input volume to its output volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
#[derive(Default)]
pub enum DataProfile {
    /// `output = value * input`
    Ratio(f64),
    /// `output = value` regardless of input
    Absolute(f64),
    /// `output = input`
    #[default]
    Passthrough,
}

impl DataProfile {
    pub fn output_mb(&self, input_mb: f64) -> f64 {
        match *self {
            DataProfile::Ratio(r) => r * input_mb,
            DataProfile::Absolute(v) => v,
            DataProfile::Passthrough => input_mb,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            DataProfile::Ratio(v) | DataProfile::Absolute(v) => v >= 0.0 && v.is_finite(),
            DataProfile::Passthrough => true,
        }
    }
}

/// Processing cost on a `speed_factor = 1.0` node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkProfile {
    #[serde(default)]
    pub seconds_per_mb: f64,
    #[serde(default)]
    pub fixed_seconds: f64,
}

impl WorkProfile {
    pub const NONE: WorkProfile = WorkProfile {
        seconds_per_mb: 0.0,
        fixed_seconds: 0.0,
    };

    pub fn per_mb(seconds_per_mb: f64) -> Self {
        WorkProfile {
            seconds_per_mb,
            fixed_seconds: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.seconds_per_mb >= 0.0
            && self.fixed_seconds >= 0.0
            && self.seconds_per_mb.is_finite()
            && self.fixed_seconds.is_finite()
    }
}

/// One linked microservice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Microservice {
    pub id: String,
    pub stage: Stage,
    #[serde(default)]
    pub demand: ResourceVector,
    #[serde(default)]
    pub required_capabilities: BTreeSet<String>,
    #[serde(default)]
    pub data_out: DataProfile,
    #[serde(default)]
    pub work: WorkProfile,
}

impl Microservice {
    /// A zero-demand, zero-work passthrough stage.
    pub fn new(id: impl Into<String>, stage: Stage) -> Self {
        Microservice {
            id: id.into(),
            stage,
            demand: ResourceVector::ZERO,
            required_capabilities: BTreeSet::new(),
            data_out: DataProfile::Passthrough,
            work: WorkProfile::NONE,
        }
    }

    pub fn with_demand(mut self, demand: ResourceVector) -> Self {
        self.demand = demand;
        self
    }

    pub fn with_profile(mut self, data_out: DataProfile) -> Self {
        self.data_out = data_out;
        self
    }

    pub fn with_work(mut self, work: WorkProfile) -> Self {
        self.work = work;
        self
    }

    pub fn requiring<I, S>(mut self, caps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.required_capabilities
            .extend(caps.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// A DAG of linked microservices ending in a single sink (the service goal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceGraph {
    pub id: String,
    pub microservices: Vec<Microservice>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    /// Megabytes injected at each source stage.
    pub source_size_mb: f64,
}

impl ServiceGraph {
    pub fn microservice(&self, id: &str) -> Option<&Microservice> {
        self.microservices.iter().find(|m| m.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.microservices.iter().position(|m| m.id == id)
    }

    pub fn predecessors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.to == id)
            .map(|e| e.from.as_str())
    }

    pub fn successors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.from == id)
            .map(|e| e.to.as_str())
    }

    /// Stage indices in topological order, breaking ties by graph order.
    /// `None` if an edge endpoint is unknown or the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.microservices.len();
        let index: BTreeMap<&str, usize> = self
            .microservices
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.as_str(), i))
            .collect();
        let mut indegree = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            let (&f, &t) = (index.get(e.from.as_str())?, index.get(e.to.as_str())?);
            succ[f].push(t);
            indegree[t] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &t in &succ[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.insert(t);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// One violated [`ServiceGraph`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphViolation {
    DuplicateId {
        id: String,
    },
    UnknownEndpoint {
        from: String,
        to: String,
        missing: String,
    },
    SelfLoop {
        id: String,
    },
    Cycle {
        ids: Vec<String>,
    },
    MultipleSinks {
        ids: Vec<String>,
    },
    NoSink,
    Unreachable {
        ids: Vec<String>,
    },
    SourceHasInputs {
        id: String,
    },
    SinkHasOutputs {
        id: String,
    },
    JoinFanIn {
        id: String,
        inputs: usize,
    },
    NegativeDemand {
        id: String,
        dimension: Dimension,
    },
    InvalidDataProfile {
        id: String,
    },
    InvalidWork {
        id: String,
    },
    InvalidSourceSize {
        value: String,
    },
}

impl GraphViolation {
    /// Short machine-friendly label.
    pub fn label(&self) -> &'static str {
        match self {
            GraphViolation::DuplicateId { .. } => "duplicate id",
            GraphViolation::UnknownEndpoint { .. } => "unknown endpoint",
            GraphViolation::SelfLoop { .. } | GraphViolation::Cycle { .. } => "cycle",
            GraphViolation::MultipleSinks { .. } => "multiple sinks",
            GraphViolation::NoSink => "no sink",
            GraphViolation::Unreachable { .. } => "unreachable",
            GraphViolation::SourceHasInputs { .. } => "source has inputs",
            GraphViolation::SinkHasOutputs { .. } => "sink has outputs",
            GraphViolation::JoinFanIn { .. } => "join fan-in",
            GraphViolation::NegativeDemand { .. } => "negative demand",
            GraphViolation::InvalidDataProfile { .. } => "invalid data profile",
            GraphViolation::InvalidWork { .. } => "invalid work profile",
            GraphViolation::InvalidSourceSize { .. } => "invalid source size",
        }
    }
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphViolation::DuplicateId { id } => write!(f, "duplicate id: `{id}`"),
            GraphViolation::UnknownEndpoint { from, to, missing } => {
                write!(
                    f,
                    "unknown endpoint: edge {from} -> {to} references `{missing}`"
                )
            }
            GraphViolation::SelfLoop { id } => write!(f, "cycle: self-loop on `{id}`"),
            GraphViolation::Cycle { ids } => write!(f, "cycle: {{{}}}", ids.join(", ")),
            GraphViolation::MultipleSinks { ids } => {
                write!(f, "multiple sinks: {{{}}}", ids.join(", "))
            }
            GraphViolation::NoSink => f.write_str("no sink"),
            GraphViolation::Unreachable { ids } => {
                write!(f, "unreachable from any source: {{{}}}", ids.join(", "))
            }
            GraphViolation::SourceHasInputs { id } => write!(f, "source `{id}` has inputs"),
            GraphViolation::SinkHasOutputs { id } => write!(f, "sink `{id}` has outputs"),
            GraphViolation::JoinFanIn { id, inputs } => {
                write!(f, "join `{id}` needs >= 2 inputs, has {inputs}")
            }
            GraphViolation::NegativeDemand { id, dimension } => {
                write!(f, "`{id}` demand {dimension} is negative")
            }
            GraphViolation::InvalidDataProfile { id } => {
                write!(f, "`{id}` has an invalid data profile")
            }
            GraphViolation::InvalidWork { id } => write!(f, "`{id}` has an invalid work profile"),
            GraphViolation::InvalidSourceSize { value } => {
                write!(f, "source_size_mb must be >= 0, got {value}")
            }
        }
    }
}

/// Result of [`validate_graph`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<GraphViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Reports every violated [`ServiceGraph`] invariant.
///
/// A sink is a stage with no outgoing edges; exactly one must exist.
/// Reachability is checked from stages of kind [`Stage::Source`].
pub fn validate_graph(graph: &ServiceGraph) -> ValidationReport {
    use petgraph::graph::DiGraph;

    let mut violations = Vec::new();

    if !is_non_negative(graph.source_size_mb) {
        violations.push(GraphViolation::InvalidSourceSize {
            value: graph.source_size_mb.to_string(),
        });
    }

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, ms) in graph.microservices.iter().enumerate() {
        if index.insert(ms.id.as_str(), i).is_some() {
            violations.push(GraphViolation::DuplicateId { id: ms.id.clone() });
        }
        for dimension in ms.demand.invalid_dimensions() {
            violations.push(GraphViolation::NegativeDemand {
                id: ms.id.clone(),
                dimension,
            });
        }
        if !ms.data_out.is_valid() {
            violations.push(GraphViolation::InvalidDataProfile { id: ms.id.clone() });
        }
        if !ms.work.is_valid() {
            violations.push(GraphViolation::InvalidWork { id: ms.id.clone() });
        }
    }

    let n = graph.microservices.len();
    let mut dag = DiGraph::<usize, ()>::with_capacity(n, graph.edges.len());
    let vertices: Vec<_> = (0..n).map(|i| dag.add_node(i)).collect();
    let mut indegree = vec![0usize; n];
    let mut outdegree = vec![0usize; n];
    for e in &graph.edges {
        let endpoints = (index.get(e.from.as_str()), index.get(e.to.as_str()));
        let (Some(&f), Some(&t)) = endpoints else {
            let missing = if endpoints.0.is_none() {
                &e.from
            } else {
                &e.to
            };
            violations.push(GraphViolation::UnknownEndpoint {
                from: e.from.clone(),
                to: e.to.clone(),
                missing: missing.clone(),
            });
            continue;
        };
        if f == t {
            violations.push(GraphViolation::SelfLoop { id: e.from.clone() });
        }
        dag.add_edge(vertices[f], vertices[t], ());
        outdegree[f] += 1;
        indegree[t] += 1;
    }

    for scc in petgraph::algo::tarjan_scc(&dag) {
        if scc.len() > 1 {
            let mut ids: Vec<String> = scc
                .iter()
                .map(|v| graph.microservices[dag[*v]].id.clone())
                .collect();
            ids.sort();
            violations.push(GraphViolation::Cycle { ids });
        }
    }

    let sinks: Vec<String> = (0..n)
        .filter(|&i| outdegree[i] == 0)
        .map(|i| graph.microservices[i].id.clone())
        .collect();
    match sinks.len() {
        0 if n > 0 => violations.push(GraphViolation::NoSink),
        0 | 1 => {}
        _ => violations.push(GraphViolation::MultipleSinks { ids: sinks }),
    }

    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| graph.microservices[i].stage == Stage::Source)
        .collect();
    for &s in &stack {
        reached[s] = true;
    }
    while let Some(i) = stack.pop() {
        for next in dag.neighbors(vertices[i]) {
            let j = dag[next];
            if !reached[j] {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    let unreachable: Vec<String> = (0..n)
        .filter(|&i| !reached[i])
        .map(|i| graph.microservices[i].id.clone())
        .collect();
    if !unreachable.is_empty() {
        violations.push(GraphViolation::Unreachable { ids: unreachable });
    }

    for (i, ms) in graph.microservices.iter().enumerate() {
        match ms.stage {
            Stage::Source if indegree[i] > 0 => {
                violations.push(GraphViolation::SourceHasInputs { id: ms.id.clone() })
            }
            Stage::Sink if outdegree[i] > 0 => {
                violations.push(GraphViolation::SinkHasOutputs { id: ms.id.clone() })
            }
            Stage::Join if indegree[i] < 2 => violations.push(GraphViolation::JoinFanIn {
                id: ms.id.clone(),
                inputs: indegree[i],
            }),
            _ => {}
        }
    }

    ValidationReport { violations }
}

/// Total assignment of microservice ids to node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub assignment: BTreeMap<String, String>,
}

impl Placement {
    pub fn node_of(&self, ms_id: &str) -> Option<&str> {
        self.assignment.get(ms_id).map(String::as_str)
    }

    pub fn assign(&mut self, ms_id: impl Into<String>, node_id: impl Into<String>) {
        self.assignment.insert(ms_id.into(), node_id.into());
    }

    /// Every microservice of `graph` on `node_id`.
    pub fn uniform(graph: &ServiceGraph, node_id: &str) -> Self {
        Placement {
            assignment: graph
                .microservices
                .iter()
                .map(|m| (m.id.clone(), node_id.to_string()))
                .collect(),
        }
    }
}

impl FromIterator<(String, String)> for Placement {
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        Placement {
            assignment: iter.into_iter().collect(),
        }
    }
}

/// Data-transformation, machine-learning and data-communication costs of a
/// placed service graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub dt_seconds: f64,
    pub ml_seconds: f64,
    pub dc_seconds: f64,
    pub total_seconds: f64,
    pub dc_bytes: f64,
}
