//! The four canonical architectures as placement functions, and the
//! feasibility check applied to any placement.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::{split_transform, DecompositionError, DEFAULT_THETA};
use crate::model::{Dimension, Placement, ResourceVector, ServiceGraph, Stage, Topology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Everything except the source runs in the cloud.
    Cloud,
    /// Everything runs on the fog node.
    Fog,
    /// Transforms on the fog node, learning in the cloud.
    Hybrid,
    /// `theta` of the raw data is transformed on the fog node, the rest is
    /// shipped raw and transformed in the cloud.
    FogPlusCloud { theta: f64 },
}

impl Strategy {
    pub const CANONICAL: [Strategy; 4] = [
        Strategy::Cloud,
        Strategy::Fog,
        Strategy::Hybrid,
        Strategy::FogPlusCloud {
            theta: DEFAULT_THETA,
        },
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Cloud => "cloud",
            Strategy::Fog => "fog",
            Strategy::Hybrid => "hybrid",
            Strategy::FogPlusCloud { .. } => "fog+cloud",
        }
    }

    /// Replaces the split fraction of a fog+cloud strategy.
    pub fn with_theta(self, theta: f64) -> Self {
        match self {
            Strategy::FogPlusCloud { .. } => Strategy::FogPlusCloud { theta },
            other => other,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown strategy `{0}` (expected cloud, fog, hybrid or fog+cloud)")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cloud" => Ok(Strategy::Cloud),
            "fog" => Ok(Strategy::Fog),
            "hybrid" => Ok(Strategy::Hybrid),
            "fog+cloud" | "fogpluscloud" | "fog-cloud" => Ok(Strategy::FogPlusCloud {
                theta: DEFAULT_THETA,
            }),
            _ => Err(UnknownStrategy(s.to_string())),
        }
    }
}

/// Binds the fog, cloud and data-source roles to concrete nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleMap {
    pub fog_node: String,
    pub cloud_node: String,
    pub source_node: String,
}

impl RoleMap {
    /// Problems with the role bindings against `topology`, as
    /// `(field, message)` pairs.
    pub fn issues(&self, topology: &Topology) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for (field, id) in [
            ("fog_node", &self.fog_node),
            ("cloud_node", &self.cloud_node),
            ("source_node", &self.source_node),
        ] {
            if topology.node(id).is_none() {
                out.push((field, format!("unknown node `{id}`")));
            }
        }
        if self.fog_node == self.cloud_node {
            out.push((
                "cloud_node",
                "fog_node and cloud_node must differ".to_string(),
            ));
        }
        out
    }
}

/// How co-resident stages share a node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Residency {
    /// All stages on a node hold their demand at once.
    #[default]
    Sum,
    /// Only the largest single demand per dimension counts.
    PeakStage,
}

/// Flags that alter the canonical placements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlaceOptions {
    /// Fog architecture uploads its final output to the cloud for storage.
    pub store_to_cloud: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("invalid role map: {0}")]
    Role(String),
    #[error(transparent)]
    GraphShape(#[from] DecompositionError),
}

/// Places `graph` under `strategy`. Returns the graph the placement covers,
/// which for fog+cloud is the split graph.
pub fn place(
    strategy: Strategy,
    graph: &ServiceGraph,
    roles: &RoleMap,
    topology: &Topology,
    options: PlaceOptions,
) -> Result<(ServiceGraph, Placement), PlacementError> {
    let issues = roles.issues(topology);
    if !issues.is_empty() {
        let msg = issues
            .iter()
            .map(|(f, m)| format!("{f}: {m}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(PlacementError::Role(msg));
    }
    let fog = roles.fog_node.as_str();
    let cloud = roles.cloud_node.as_str();

    let (graph, placement) = match strategy {
        Strategy::Cloud => {
            let p = graph
                .microservices
                .iter()
                .map(|m| {
                    let node = if m.stage == Stage::Source {
                        &roles.source_node
                    } else {
                        cloud
                    };
                    (m.id.clone(), node.to_string())
                })
                .collect();
            (graph.clone(), p)
        }
        Strategy::Fog => {
            let p = graph
                .microservices
                .iter()
                .map(|m| {
                    let node = if m.stage == Stage::Sink && options.store_to_cloud {
                        cloud
                    } else {
                        fog
                    };
                    (m.id.clone(), node.to_string())
                })
                .collect();
            (graph.clone(), p)
        }
        Strategy::Hybrid => {
            let p = graph
                .microservices
                .iter()
                .map(|m| {
                    let node = match m.stage {
                        Stage::Source | Stage::Transform | Stage::Join => fog,
                        Stage::Learn | Stage::Sink => cloud,
                    };
                    (m.id.clone(), node.to_string())
                })
                .collect();
            (graph.clone(), p)
        }
        Strategy::FogPlusCloud { theta } => {
            let split = split_transform(graph, theta)?;
            let p = split
                .microservices
                .iter()
                .map(|m| {
                    let node = match m.stage {
                        Stage::Source => roles.source_node.as_str(),
                        Stage::Transform if m.id.ends_with(".1") => fog,
                        _ => cloud,
                    };
                    (m.id.clone(), node.to_string())
                })
                .collect();
            (split, p)
        }
    };
    Ok((graph, placement))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    Capacity { dimension: Dimension },
    MissingCapability { capability: String },
    MissingLink { from_ms: String, to_ms: String },
    UnknownNode,
    Unassigned { ms_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityViolation {
    pub node_id: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for FeasibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node `{}`: {}", self.node_id, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<FeasibilityViolation>,
}

impl FeasibilityReport {
    fn from_violations(violations: Vec<FeasibilityViolation>) -> Self {
        FeasibilityReport {
            feasible: violations.is_empty(),
            violations,
        }
    }
}

/// Aggregate demand on one node under `residency`.
pub fn node_load<'a, I>(demands: I, residency: Residency) -> ResourceVector
where
    I: IntoIterator<Item = &'a ResourceVector>,
{
    demands
        .into_iter()
        .fold(ResourceVector::ZERO, |acc, d| match residency {
            Residency::Sum => acc.add(d),
            Residency::PeakStage => acc.max(d),
        })
}

/// Checks capacity, capability and link constraints of `placement`.
pub fn check_feasible(
    placement: &Placement,
    graph: &ServiceGraph,
    topology: &Topology,
    residency: Residency,
) -> FeasibilityReport {
    let mut violations = Vec::new();
    let mut per_node: BTreeMap<&str, Vec<&ResourceVector>> = BTreeMap::new();

    for ms in &graph.microservices {
        let Some(node_id) = placement.node_of(&ms.id) else {
            violations.push(FeasibilityViolation {
                node_id: String::new(),
                kind: ViolationKind::Unassigned {
                    ms_id: ms.id.clone(),
                },
                detail: format!("`{}` is not assigned to any node", ms.id),
            });
            continue;
        };
        let Some(node) = topology.node(node_id) else {
            violations.push(FeasibilityViolation {
                node_id: node_id.to_string(),
                kind: ViolationKind::UnknownNode,
                detail: format!("`{}` is assigned to unknown node", ms.id),
            });
            continue;
        };
        per_node
            .entry(node.id.as_str())
            .or_default()
            .push(&ms.demand);
        for cap in ms.required_capabilities.difference(&node.capabilities) {
            violations.push(FeasibilityViolation {
                node_id: node.id.clone(),
                kind: ViolationKind::MissingCapability {
                    capability: cap.clone(),
                },
                detail: format!("`{}` requires capability `{cap}`", ms.id),
            });
        }
    }

    for (node_id, demands) in &per_node {
        let Some(node) = topology.node(node_id) else {
            continue;
        };
        let load = node_load(demands.iter().copied(), residency);
        for dimension in load.exceeded(&node.capacity) {
            violations.push(FeasibilityViolation {
                node_id: node.id.clone(),
                kind: ViolationKind::Capacity { dimension },
                detail: format!(
                    "{dimension} demand {} exceeds capacity {}",
                    load.get(dimension),
                    node.capacity.get(dimension)
                ),
            });
        }
    }

    for e in &graph.edges {
        let (Some(a), Some(b)) = (placement.node_of(&e.from), placement.node_of(&e.to)) else {
            continue;
        };
        if a != b && topology.link(a, b).is_none() {
            violations.push(FeasibilityViolation {
                node_id: a.to_string(),
                kind: ViolationKind::MissingLink {
                    from_ms: e.from.clone(),
                    to_ms: e.to.clone(),
                },
                detail: format!("no link `{a}` -> `{b}` for edge {} -> {}", e.from, e.to),
            });
        }
    }

    FeasibilityReport::from_violations(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{decompose, ServiceTemplate, StageSpec, TemplateKind};
    use crate::model::{Link, Microservice, Node, NodeKind};

    fn topo() -> Topology {
        Topology {
            nodes: vec![
                Node::new(
                    "fog",
                    NodeKind::RaspberryPi,
                    ResourceVector::splat(1000.0),
                    1.0,
                ),
                Node::new("cloud", NodeKind::Cloud, ResourceVector::splat(1e6), 10.0),
            ],
            links: vec![Link::new("fog", "cloud", 1.0)],
        }
    }

    fn roles() -> RoleMap {
        RoleMap {
            fog_node: "fog".into(),
            cloud_node: "cloud".into(),
            source_node: "fog".into(),
        }
    }

    fn wisdm_like() -> ServiceGraph {
        decompose(&ServiceTemplate {
            id: "w".into(),
            kind: TemplateKind::ActivityNumerical,
            transform_stages: (1..=6).map(|i| StageSpec::new(format!("S{i}"))).collect(),
            learn_stage: StageSpec::new("ML"),
            source_size_mb: 50.0,
        })
        .unwrap()
    }

    #[test]
    fn hybrid_splits_transforms_and_learning() {
        let (_, p) = place(
            Strategy::Hybrid,
            &wisdm_like(),
            &roles(),
            &topo(),
            PlaceOptions::default(),
        )
        .unwrap();
        for i in 1..=6 {
            assert_eq!(p.node_of(&format!("S{i}")), Some("fog"));
        }
        assert_eq!(p.node_of("ML"), Some("cloud"));
        assert_eq!(p.node_of("sink"), Some("cloud"));
    }

    #[test]
    fn cloud_puts_everything_but_source_in_cloud() {
        let g = wisdm_like();
        let (_, p) = place(
            Strategy::Cloud,
            &g,
            &roles(),
            &topo(),
            PlaceOptions::default(),
        )
        .unwrap();
        for m in &g.microservices {
            let expect = if m.stage == Stage::Source {
                "fog"
            } else {
                "cloud"
            };
            assert_eq!(p.node_of(&m.id), Some(expect));
        }
    }

    #[test]
    fn fog_sink_follows_store_flag() {
        let g = wisdm_like();
        let (_, p) = place(
            Strategy::Fog,
            &g,
            &roles(),
            &topo(),
            PlaceOptions::default(),
        )
        .unwrap();
        assert!(p.assignment.values().all(|n| n == "fog"));
        let (_, p) = place(
            Strategy::Fog,
            &g,
            &roles(),
            &topo(),
            PlaceOptions {
                store_to_cloud: true,
            },
        )
        .unwrap();
        assert_eq!(p.node_of("sink"), Some("cloud"));
        assert_eq!(p.node_of("ML"), Some("fog"));
    }

    #[test]
    fn fog_plus_cloud_naming() {
        let (split, p) = place(
            Strategy::FogPlusCloud { theta: 0.7 },
            &wisdm_like(),
            &roles(),
            &topo(),
            PlaceOptions::default(),
        )
        .unwrap();
        let on = |node: &str| {
            split
                .microservices
                .iter()
                .filter(|m| m.stage != Stage::Source && p.node_of(&m.id) == Some(node))
                .count()
        };
        assert_eq!(on("fog"), 6);
        // six cloud-branch transforms, join, ML, sink
        assert_eq!(on("cloud"), 9);
        for i in 1..=6 {
            assert_eq!(p.node_of(&format!("S{i}.1")), Some("fog"));
            assert_eq!(p.node_of(&format!("S{i}.2")), Some("cloud"));
        }
    }

    #[test]
    fn bad_roles_rejected() {
        let mut r = roles();
        r.cloud_node = "fog".into();
        assert!(matches!(
            place(
                Strategy::Cloud,
                &wisdm_like(),
                &r,
                &topo(),
                PlaceOptions::default()
            ),
            Err(PlacementError::Role(_))
        ));
        r.cloud_node = "nowhere".into();
        assert!(place(
            Strategy::Cloud,
            &wisdm_like(),
            &r,
            &topo(),
            PlaceOptions::default()
        )
        .is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::CANONICAL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("edge".parse::<Strategy>().is_err());
    }

    fn one_node(ram: f64) -> Topology {
        Topology {
            nodes: vec![Node::new(
                "n",
                NodeKind::Generic,
                ResourceVector::splat(1e9).with(Dimension::RamMb, ram),
                1.0,
            )],
            links: vec![],
        }
    }

    fn graph_with_ram(rams: &[f64]) -> ServiceGraph {
        let mut ms = vec![Microservice::new("src", Stage::Source)];
        for (i, r) in rams.iter().enumerate() {
            ms.push(
                Microservice::new(format!("t{i}"), Stage::Transform)
                    .with_demand(ResourceVector::ZERO.with(Dimension::RamMb, *r)),
            );
        }
        ms.push(Microservice::new("snk", Stage::Sink));
        let edges = ms
            .windows(2)
            .map(|w| crate::model::Edge::new(w[0].id.clone(), w[1].id.clone()))
            .collect();
        ServiceGraph {
            id: "g".into(),
            microservices: ms,
            edges,
            source_size_mb: 1.0,
        }
    }

    #[test]
    fn stage_too_big_for_node() {
        let g = graph_with_ram(&[500.0]);
        let report = check_feasible(
            &Placement::uniform(&g, "n"),
            &g,
            &one_node(256.0),
            Residency::Sum,
        );
        assert!(!report.feasible);
        assert_eq!(
            report.violations[0].kind,
            ViolationKind::Capacity {
                dimension: Dimension::RamMb
            }
        );
        assert_eq!(report.violations[0].node_id, "n");
    }

    #[test]
    fn empty_graph_is_feasible() {
        let g = ServiceGraph {
            id: "empty".into(),
            microservices: vec![],
            edges: vec![],
            source_size_mb: 0.0,
        };
        assert!(check_feasible(&Placement::default(), &g, &one_node(0.0), Residency::Sum).feasible);
    }

    #[test]
    fn co_resident_demands_are_summed() {
        let g = graph_with_ram(&[400.0, 400.0]);
        let p = Placement::uniform(&g, "n");
        let topo = one_node(650.0);
        let report = check_feasible(&p, &g, &topo, Residency::Sum);
        assert!(!report.feasible);
        assert!(report.violations[0].detail.contains("800"));
        assert!(check_feasible(&p, &g, &topo, Residency::PeakStage).feasible);
    }

    #[test]
    fn missing_capability_and_link() {
        let mut g = graph_with_ram(&[1.0]);
        g.microservices[1]
            .required_capabilities
            .insert("opencv".into());
        let mut topo = one_node(10.0);
        topo.nodes.push(Node::new(
            "m",
            NodeKind::Mobile,
            ResourceVector::splat(1e9),
            1.0,
        ));
        let mut p = Placement::uniform(&g, "n");
        p.assign("snk", "m");
        let report = check_feasible(&p, &g, &topo, Residency::Sum);
        let kinds: Vec<_> = report.violations.iter().map(|v| &v.kind).collect();
        assert!(kinds.contains(&&ViolationKind::MissingCapability {
            capability: "opencv".into()
        }));
        assert!(kinds.contains(&&ViolationKind::MissingLink {
            from_ms: "t0".into(),
            to_ms: "snk".into()
        }));
    }
}
