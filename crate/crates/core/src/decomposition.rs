//! Turning service templates into linked-microservice chains, and the
//! data-parallel split used by the fog+cloud architecture.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_graph, DataProfile, Edge, Microservice, ResourceVector, ServiceGraph, Stage,
    WorkProfile,
};

/// Fraction of the raw data processed on the fog side by default.
pub const DEFAULT_THETA: f64 = 0.7;

pub const SOURCE_ID: &str = "source";
pub const SINK_ID: &str = "sink";
pub const JOIN_ID: &str = "join";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error("invalid template `{template}`: {reason}")]
    InvalidTemplate { template: String, reason: String },
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidSplit(f64),
    #[error("graph `{graph}` is not a source -> transforms -> learn -> sink chain: {reason}")]
    InvalidGraph { graph: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    ActivityNumerical,
    Text,
    Image,
    Custom,
}

/// A compute stage of a template; its [`Stage`] kind is implied by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub id: String,
    #[serde(default)]
    pub demand: ResourceVector,
    #[serde(default)]
    pub required_capabilities: BTreeSet<String>,
    #[serde(default)]
    pub data_out: DataProfile,
    #[serde(default)]
    pub work: WorkProfile,
}

impl StageSpec {
    pub fn new(id: impl Into<String>) -> Self {
        StageSpec {
            id: id.into(),
            demand: ResourceVector::ZERO,
            required_capabilities: BTreeSet::new(),
            data_out: DataProfile::Passthrough,
            work: WorkProfile::NONE,
        }
    }

    pub fn to_microservice(&self, stage: Stage) -> Microservice {
        Microservice {
            id: self.id.clone(),
            stage,
            demand: self.demand,
            required_capabilities: self.required_capabilities.clone(),
            data_out: self.data_out,
            work: self.work,
        }
    }
}

/// A monolithic service described as measurement stages feeding one
/// learning stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceTemplate {
    pub id: String,
    pub kind: TemplateKind,
    pub transform_stages: Vec<StageSpec>,
    pub learn_stage: StageSpec,
    pub source_size_mb: f64,
}

/// Builds `source -> S1 -> ... -> Sn -> learn -> sink`.
pub fn decompose(template: &ServiceTemplate) -> Result<ServiceGraph, DecompositionError> {
    let invalid = |reason: String| DecompositionError::InvalidTemplate {
        template: template.id.clone(),
        reason,
    };
    if template.transform_stages.is_empty() {
        return Err(invalid("at least one transform stage is required".into()));
    }

    let mut microservices = Vec::with_capacity(template.transform_stages.len() + 3);
    microservices.push(Microservice::new(SOURCE_ID, Stage::Source));
    microservices.extend(
        template
            .transform_stages
            .iter()
            .map(|s| s.to_microservice(Stage::Transform)),
    );
    microservices.push(template.learn_stage.to_microservice(Stage::Learn));
    microservices.push(Microservice::new(SINK_ID, Stage::Sink));

    let edges = microservices
        .windows(2)
        .map(|w| Edge::new(w[0].id.clone(), w[1].id.clone()))
        .collect();
    let graph = ServiceGraph {
        id: template.id.clone(),
        microservices,
        edges,
        source_size_mb: template.source_size_mb,
    };

    let report = validate_graph(&graph);
    if let Some(first) = report.violations.first() {
        return Err(invalid(first.to_string()));
    }
    Ok(graph)
}

/// Stage indices of a `source -> transforms -> learn -> sink` chain.
#[derive(Debug)]
pub(crate) struct ChainShape {
    pub source: usize,
    pub transforms: Vec<usize>,
    pub learn: usize,
    pub sink: usize,
}

pub(crate) fn chain_shape(graph: &ServiceGraph) -> Result<ChainShape, DecompositionError> {
    let bad = |reason: &str| DecompositionError::InvalidGraph {
        graph: graph.id.clone(),
        reason: reason.to_string(),
    };
    if !validate_graph(graph).is_valid() {
        return Err(bad("graph fails validation"));
    }
    let order = graph
        .topological_order()
        .ok_or_else(|| bad("not acyclic"))?;
    if graph.edges.len() + 1 != graph.microservices.len() {
        return Err(bad("not a linear chain"));
    }
    for pair in order.windows(2) {
        let (a, b) = (
            &graph.microservices[pair[0]].id,
            &graph.microservices[pair[1]].id,
        );
        if !graph.edges.iter().any(|e| &e.from == a && &e.to == b) {
            return Err(bad("not a linear chain"));
        }
    }
    let stages: Vec<Stage> = order
        .iter()
        .map(|&i| graph.microservices[i].stage)
        .collect();
    let n = stages.len();
    if n < 4
        || stages[0] != Stage::Source
        || stages[n - 1] != Stage::Sink
        || stages[n - 2] != Stage::Learn
        || stages[1..n - 2].iter().any(|s| *s != Stage::Transform)
    {
        return Err(bad(
            "stage kinds do not follow source, transform+, learn, sink",
        ));
    }
    Ok(ChainShape {
        source: order[0],
        transforms: order[1..n - 2].to_vec(),
        learn: order[n - 2],
        sink: order[n - 1],
    })
}

/// Suffix for the fog-side copy of a split stage.
pub fn fog_branch_id(id: &str) -> String {
    format!("{id}.1")
}

/// Suffix for the cloud-side copy of a split stage.
pub fn cloud_branch_id(id: &str) -> String {
    format!("{id}.2")
}

/// Duplicates the transform prefix of a chain into two parallel branches.
///
/// Branch `.1` receives `theta * source_size_mb` and branch `.2` the
/// remainder; each branch has its own source stage emitting its share. A
/// free passthrough join merges both branches ahead of the learn stage.
pub fn split_transform(
    graph: &ServiceGraph,
    theta: f64,
) -> Result<ServiceGraph, DecompositionError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(DecompositionError::InvalidSplit(theta));
    }
    let shape = chain_shape(graph)?;
    let source = &graph.microservices[shape.source];
    let total = graph.source_size_mb;
    let fog_share = theta * total;
    let cloud_share = total - fog_share;

    let mut microservices = Vec::with_capacity(2 * shape.transforms.len() + 5);
    let mut edges = Vec::new();
    for (share, rename) in [
        (fog_share, fog_branch_id as fn(&str) -> String),
        (cloud_share, cloud_branch_id),
    ] {
        let mut src = source.clone();
        src.id = rename(&source.id);
        src.data_out = DataProfile::Absolute(share);
        let mut prev = src.id.clone();
        microservices.push(src);
        for &t in &shape.transforms {
            let mut copy = graph.microservices[t].clone();
            copy.id = rename(&copy.id);
            edges.push(Edge::new(prev, copy.id.clone()));
            prev = copy.id.clone();
            microservices.push(copy);
        }
        edges.push(Edge::new(prev, JOIN_ID));
    }

    let learn = graph.microservices[shape.learn].clone();
    let sink = graph.microservices[shape.sink].clone();
    edges.push(Edge::new(JOIN_ID, learn.id.clone()));
    edges.push(Edge::new(learn.id.clone(), sink.id.clone()));
    microservices.push(Microservice::new(JOIN_ID, Stage::Join));
    microservices.push(learn);
    microservices.push(sink);

    let split = ServiceGraph {
        id: graph.id.clone(),
        microservices,
        edges,
        source_size_mb: total,
    };
    if let Some(v) = validate_graph(&split).violations.first() {
        return Err(DecompositionError::InvalidGraph {
            graph: graph.id.clone(),
            reason: format!("split result invalid: {v}"),
        });
    }
    Ok(split)
}
