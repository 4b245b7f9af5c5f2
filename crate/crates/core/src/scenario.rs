//! Scenario documents: strict JSON parsing with located errors, canonical
//! serialization, and expansion into placeable service graphs.
//!
//! A scenario bundles a topology, service templates (and optionally explicit
//! service graphs), the fog/cloud role bindings, per-stage work calibration
//! and run options. The format is described in `docs/scenario-schema.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::{
    decompose, ServiceTemplate, StageSpec, DEFAULT_THETA, JOIN_ID, SINK_ID, SOURCE_ID,
};
use crate::model::{validate_graph, ServiceGraph, Topology, WorkProfile};
use crate::placement::{Residency, RoleMap};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    /// Fog architecture uploads its final output for storage.
    #[serde(default)]
    pub store_to_cloud: bool,
    #[serde(default)]
    pub residency: Residency,
    /// Fog share of the raw data under the fog+cloud architecture.
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            store_to_cloud: false,
            residency: Residency::Sum,
            theta: DEFAULT_THETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    /// Free-form provenance notes; ignored by every computation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub topology: Topology,
    #[serde(default)]
    pub templates: Vec<ServiceTemplate>,
    /// Explicit graphs, for shapes templates cannot express (branches).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub graphs: Vec<ServiceGraph>,
    /// Required by the canonical strategies; optional otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<RoleMap>,
    /// Work profile overrides keyed by stage id.
    #[serde(default)]
    pub calibration: BTreeMap<String, WorkProfile>,
    #[serde(default)]
    pub options: ScenarioOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    /// An id that names nothing.
    Reference,
    /// A value outside its allowed range or a broken structural rule.
    Invariant,
}

/// One located problem in a scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    /// JSON pointer into the document.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            IssueKind::Reference => "reference error",
            IssueKind::Invariant => "invariant error",
        };
        write!(f, "{kind} at {}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{} problem(s): {}", .0.len(), join_issues(.0))]
    Invalid(Vec<Issue>),
}

fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(Issue::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl ScenarioError {
    /// Every diagnostic line this error carries.
    pub fn diagnostics(&self) -> Vec<String> {
        match self {
            ScenarioError::Invalid(issues) => issues.iter().map(Issue::to_string).collect(),
            other => vec![other.to_string()],
        }
    }

    pub fn issues(&self) -> &[Issue] {
        match self {
            ScenarioError::Invalid(issues) => issues,
            _ => &[],
        }
    }
}

fn escape_pointer(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&escape_pointer(key));
            }
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    out
}

/// Parses and fully validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;

    if let Some(v) = value.get("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(ScenarioError::Schema {
                path: "/schema_version".into(),
                message: format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"),
            });
        }
    }

    let scenario: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = pointer_of(e.path());
        let message = e.inner().to_string();
        if let Some(field) = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            path.push('/');
            path.push_str(&escape_pointer(field));
        }
        ScenarioError::Schema {
            path: if path.is_empty() { "/".into() } else { path },
            message,
        }
    })?;

    let issues = scenario.issues();
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(issues))
    }
}

/// Canonical text form: sorted keys, shortest round-trip number formatting,
/// two-space indentation, trailing newline.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    // Going through `Value` sorts every object's keys.
    let value = serde_json::to_value(scenario).expect("scenario is always representable as JSON");
    let mut text = serde_json::to_string_pretty(&value).expect("value serialization cannot fail");
    text.push('\n');
    text
}

struct IssueSink(Vec<Issue>);

impl IssueSink {
    fn reference(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            kind: IssueKind::Reference,
            path: path.into(),
            message: message.into(),
        });
    }

    fn invariant(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            kind: IssueKind::Invariant,
            path: path.into(),
            message: message.into(),
        });
    }
}

fn check_stage(sink: &mut IssueSink, path: &str, stage: &StageSpec) {
    for dim in stage.demand.invalid_dimensions() {
        sink.invariant(
            format!("{path}/demand/{dim}"),
            format!("demand {dim} must be >= 0"),
        );
    }
    if !stage.data_out.is_valid() {
        sink.invariant(
            format!("{path}/data_out/value"),
            "data profile value must be >= 0",
        );
    }
    check_work(sink, &format!("{path}/work"), &stage.work);
}

fn check_work(sink: &mut IssueSink, path: &str, work: &WorkProfile) {
    if !(work.seconds_per_mb >= 0.0 && work.seconds_per_mb.is_finite()) {
        sink.invariant(
            format!("{path}/seconds_per_mb"),
            "seconds_per_mb must be >= 0",
        );
    }
    if !(work.fixed_seconds >= 0.0 && work.fixed_seconds.is_finite()) {
        sink.invariant(
            format!("{path}/fixed_seconds"),
            "fixed_seconds must be >= 0",
        );
    }
}

impl Scenario {
    /// Every reference and invariant problem, in document order.
    pub fn issues(&self) -> Vec<Issue> {
        let mut sink = IssueSink(Vec::new());

        if self.schema_version != SCHEMA_VERSION {
            sink.invariant("/schema_version", format!("expected {SCHEMA_VERSION}"));
        }

        for issue in self.topology.validate() {
            let path = format!("/topology{}", issue.path);
            if issue.message.starts_with("unknown node") {
                sink.reference(path, issue.message);
            } else {
                sink.invariant(path, issue.message);
            }
        }

        let mut service_ids = BTreeSet::new();
        let mut stage_ids = BTreeSet::new();
        for (i, t) in self.templates.iter().enumerate() {
            let base = format!("/templates/{i}");
            if !service_ids.insert(t.id.as_str()) {
                sink.invariant(
                    format!("{base}/id"),
                    format!("duplicate service id `{}`", t.id),
                );
            }
            if !(t.source_size_mb >= 0.0 && t.source_size_mb.is_finite()) {
                sink.invariant(
                    format!("{base}/source_size_mb"),
                    "source_size_mb must be >= 0",
                );
            }
            if t.transform_stages.is_empty() {
                sink.invariant(
                    format!("{base}/transform_stages"),
                    "at least one transform stage is required",
                );
            }
            let mut local = BTreeSet::new();
            let stages = t
                .transform_stages
                .iter()
                .enumerate()
                .map(|(j, s)| (format!("{base}/transform_stages/{j}"), s))
                .chain(std::iter::once((
                    format!("{base}/learn_stage"),
                    &t.learn_stage,
                )));
            for (path, stage) in stages {
                if [SOURCE_ID, SINK_ID, JOIN_ID].contains(&stage.id.as_str()) {
                    sink.invariant(
                        format!("{path}/id"),
                        format!("stage id `{}` is reserved", stage.id),
                    );
                } else if !local.insert(stage.id.as_str()) {
                    sink.invariant(
                        format!("{path}/id"),
                        format!("duplicate stage id `{}`", stage.id),
                    );
                }
                stage_ids.insert(stage.id.as_str());
                check_stage(&mut sink, &path, stage);
            }
        }

        for (i, g) in self.graphs.iter().enumerate() {
            let base = format!("/graphs/{i}");
            if !service_ids.insert(g.id.as_str()) {
                sink.invariant(
                    format!("{base}/id"),
                    format!("duplicate service id `{}`", g.id),
                );
            }
            for v in validate_graph(g).violations {
                sink.invariant(base.clone(), v.to_string());
            }
            stage_ids.extend(g.microservices.iter().map(|m| m.id.as_str()));
        }

        if let Some(roles) = &self.roles {
            for (field, message) in roles.issues(&self.topology) {
                let path = format!("/roles/{field}");
                if message.starts_with("unknown node") {
                    sink.reference(path, message);
                } else {
                    sink.invariant(path, message);
                }
            }
        }

        for (stage, work) in &self.calibration {
            let path = format!("/calibration/{}", escape_pointer(stage));
            if !stage_ids.contains(stage.as_str()) {
                sink.reference(path.clone(), format!("no stage named `{stage}`"));
            }
            check_work(&mut sink, &path, work);
        }

        let theta = self.options.theta;
        if !(theta > 0.0 && theta < 1.0) {
            sink.invariant(
                "/options/theta",
                format!("theta must lie in (0, 1), got {theta}"),
            );
        }

        sink.0
    }

    /// Every service as a placeable graph, calibration applied: templates
    /// first (decomposed into chains), then explicit graphs.
    pub fn services(&self) -> Result<Vec<ServiceGraph>, ScenarioError> {
        let mut out = Vec::with_capacity(self.templates.len() + self.graphs.len());
        for (i, t) in self.templates.iter().enumerate() {
            let mut graph = decompose(t).map_err(|e| {
                ScenarioError::Invalid(vec![Issue {
                    kind: IssueKind::Invariant,
                    path: format!("/templates/{i}"),
                    message: e.to_string(),
                }])
            })?;
            self.calibrate(&mut graph);
            out.push(graph);
        }
        for g in &self.graphs {
            let mut graph = g.clone();
            self.calibrate(&mut graph);
            out.push(graph);
        }
        Ok(out)
    }

    pub fn service(&self, id: &str) -> Option<ServiceGraph> {
        self.services().ok()?.into_iter().find(|g| g.id == id)
    }

    fn calibrate(&self, graph: &mut ServiceGraph) {
        for ms in &mut graph.microservices {
            if let Some(work) = self.calibration.get(&ms.id) {
                ms.work = *work;
            }
        }
    }
}

/// Scenarios shipped with the crate.
pub mod fixtures {
    pub const WISDM: &str = include_str!("../fixtures/wisdm.json");
    pub const NEWSGROUPS: &str = include_str!("../fixtures/newsgroups.json");
    pub const DOGS_VS_CATS: &str = include_str!("../fixtures/dogs_vs_cats.json");

    /// `(file name, document)` for every bundled scenario.
    pub const ALL: [(&str, &str); 3] = [
        ("wisdm.json", WISDM),
        ("newsgroups.json", NEWSGROUPS),
        ("dogs_vs_cats.json", DOGS_VS_CATS),
    ];
}
