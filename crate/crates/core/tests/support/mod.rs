//! Random instance generators and a brute-force placement oracle shared by
//! the integration and acceptance tests. The oracle deliberately avoids the
//! library's cost tables and search code: it re-derives data volumes,
//! feasibility and costs straight from the model types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fogsim::decomposition::{ServiceTemplate, StageSpec, TemplateKind};
use fogsim::model::{
    DataProfile, Edge, Link, Microservice, Node, NodeKind, ResourceVector, ServiceGraph, Stage,
    Topology, WorkProfile,
};
use fogsim::placement::{Residency, RoleMap};
use fogsim::scenario::{Scenario, ScenarioOptions};
use rand::seq::SliceRandom;
use rand::Rng;

pub const GPU: &str = "gpu";

/// A random valid DAG: one or two sources, a single sink, 3..=max_stages
/// stages in total, mixed transform and learn stages in between.
pub fn random_graph<R: Rng>(rng: &mut R, max_stages: usize) -> ServiceGraph {
    let n = rng.gen_range(3..=max_stages.max(3));
    let sources = if n >= 4 && rng.gen_bool(0.3) { 2 } else { 1 };
    let mut microservices = Vec::with_capacity(n);
    for i in 0..n {
        let stage = if i < sources {
            Stage::Source
        } else if i == n - 1 {
            Stage::Sink
        } else if rng.gen_bool(0.3) {
            Stage::Learn
        } else {
            Stage::Transform
        };
        let id = match stage {
            Stage::Source => format!("src{i}"),
            Stage::Sink => "sink".to_string(),
            _ => format!("m{i}"),
        };
        let mut ms = Microservice::new(id, stage);
        if !matches!(stage, Stage::Sink) {
            ms.demand = ResourceVector {
                cpu: rng.gen_range(0.0..2.0),
                ram_mb: rng.gen_range(0.0..400.0),
                storage_mb: rng.gen_range(0.0..100.0),
                energy_units: 0.0,
                bandwidth_mbps: 0.0,
            };
        }
        if matches!(stage, Stage::Transform | Stage::Learn) {
            ms.work = WorkProfile {
                seconds_per_mb: rng.gen_range(0.0..5.0),
                fixed_seconds: rng.gen_range(0.0..3.0),
            };
            ms.data_out = if rng.gen_bool(0.5) {
                DataProfile::Ratio(rng.gen_range(0.05..1.5))
            } else {
                DataProfile::Passthrough
            };
            if rng.gen_bool(0.2) {
                ms.required_capabilities.insert(GPU.to_string());
            }
        }
        microservices.push(ms);
    }

    let mut edges = Vec::new();
    let mut has_out = vec![false; n];
    for i in sources..n - 1 {
        let mut preds: Vec<usize> = (0..i).collect();
        preds.shuffle(rng);
        let count = if i >= 2 && rng.gen_bool(0.3) { 2 } else { 1 };
        // Every stage hangs off an earlier one, so all are reachable.
        let mut chosen: Vec<usize> = preds.into_iter().take(count).collect();
        chosen.sort_unstable();
        for p in chosen {
            edges.push(Edge::new(
                microservices[p].id.clone(),
                microservices[i].id.clone(),
            ));
            has_out[p] = true;
        }
    }
    for (i, used) in has_out.iter().enumerate().take(n - 1) {
        if !used {
            edges.push(Edge::new(microservices[i].id.clone(), "sink"));
        }
    }

    ServiceGraph {
        id: "svc".into(),
        microservices,
        edges,
        source_size_mb: rng.gen_range(1.0..100.0),
    }
}

/// A random topology of 1..=max_nodes nodes with a random subset of links.
pub fn random_topology<R: Rng>(rng: &mut R, max_nodes: usize) -> Topology {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let nodes = (0..n)
        .map(|i| {
            let mut node = Node::new(
                format!("n{i}"),
                if i == 0 {
                    NodeKind::RaspberryPi
                } else {
                    NodeKind::Generic
                },
                ResourceVector {
                    cpu: rng.gen_range(1.0..8.0),
                    ram_mb: rng.gen_range(200.0..1500.0),
                    storage_mb: rng.gen_range(100.0..600.0),
                    energy_units: 0.0,
                    bandwidth_mbps: 0.0,
                },
                rng.gen_range(0.5..10.0),
            );
            if rng.gen_bool(0.5) {
                node.capabilities.insert(GPU.to_string());
            }
            node
        })
        .collect();
    let mut links = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(0.75) {
                links.push(
                    Link::new(format!("n{a}"), format!("n{b}"), rng.gen_range(0.5..100.0))
                        .with_latency(if rng.gen_bool(0.5) {
                            0.0
                        } else {
                            rng.gen_range(0.0..0.5)
                        }),
                );
            }
        }
    }
    Topology { nodes, links }
}

/// Which quantity the oracle minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleObjective {
    SequentialTotal,
    DcBytes,
}

/// Costs of one assignment as the oracle sees them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCost {
    pub dt: f64,
    pub ml: f64,
    pub dc: f64,
    pub total: f64,
    pub bytes: f64,
}

/// Input/output MB per stage, by recursion over predecessors. Inputs are
/// accumulated in edge order starting from zero.
pub fn oracle_volumes(graph: &ServiceGraph) -> Vec<(f64, f64)> {
    fn volume(graph: &ServiceGraph, i: usize, memo: &mut Vec<Option<(f64, f64)>>) -> (f64, f64) {
        if let Some(v) = memo[i] {
            return v;
        }
        let ms = &graph.microservices[i];
        let input = if ms.stage == Stage::Source {
            graph.source_size_mb
        } else {
            let mut sum = 0.0;
            for e in graph.edges.iter().filter(|e| e.to == ms.id) {
                let p = graph
                    .microservices
                    .iter()
                    .position(|m| m.id == e.from)
                    .unwrap();
                sum += volume(graph, p, memo).1;
            }
            sum
        };
        let output = match ms.data_out {
            DataProfile::Ratio(r) => r * input,
            DataProfile::Absolute(v) => v,
            DataProfile::Passthrough => input,
        };
        memo[i] = Some((input, output));
        (input, output)
    }
    let mut memo = vec![None; graph.microservices.len()];
    (0..graph.microservices.len())
        .map(|i| volume(graph, i, &mut memo))
        .collect()
}

/// `None` if the assignment (node index per stage, graph order) is
/// infeasible under summed residency.
pub fn oracle_cost(
    graph: &ServiceGraph,
    topology: &Topology,
    assign: &[usize],
) -> Option<OracleCost> {
    let volumes = oracle_volumes(graph);
    let pos = |id: &str| graph.microservices.iter().position(|m| m.id == id).unwrap();

    for (k, node) in topology.nodes.iter().enumerate() {
        let mut load = [0.0f64; 5];
        for (s, ms) in graph.microservices.iter().enumerate() {
            if assign[s] != k {
                continue;
            }
            if !ms.required_capabilities.is_subset(&node.capabilities) {
                return None;
            }
            let d = &ms.demand;
            for (slot, v) in load.iter_mut().zip([
                d.cpu,
                d.ram_mb,
                d.storage_mb,
                d.energy_units,
                d.bandwidth_mbps,
            ]) {
                *slot += v;
            }
        }
        let c = &node.capacity;
        let cap = [
            c.cpu,
            c.ram_mb,
            c.storage_mb,
            c.energy_units,
            c.bandwidth_mbps,
        ];
        if load.iter().zip(cap).any(|(l, c)| *l > c) {
            return None;
        }
    }

    let (mut dt, mut ml) = (0.0, 0.0);
    for (s, ms) in graph.microservices.iter().enumerate() {
        let node = &topology.nodes[assign[s]];
        let secs =
            (ms.work.fixed_seconds + ms.work.seconds_per_mb * volumes[s].0) / node.speed_factor;
        if ms.stage == Stage::Learn {
            ml += secs;
        } else {
            dt += secs;
        }
    }
    let (mut dc, mut bytes) = (0.0, 0.0);
    for e in &graph.edges {
        let (f, t) = (pos(&e.from), pos(&e.to));
        if assign[f] == assign[t] {
            continue;
        }
        let (a, b) = (&topology.nodes[assign[f]].id, &topology.nodes[assign[t]].id);
        let link = topology.links.iter().find(|l| &l.from == a && &l.to == b)?;
        let mb = volumes[f].1;
        dc += mb * 8.0 / link.bandwidth_mbps + link.latency_s;
        bytes += mb * 1e6;
    }
    Some(OracleCost {
        dt,
        ml,
        dc,
        total: dt + ml + dc,
        bytes,
    })
}

/// Best objective value over every total assignment, enumerated from the
/// highest node index downwards with the last stage varying slowest.
pub fn oracle_optimum(
    graph: &ServiceGraph,
    topology: &Topology,
    objective: OracleObjective,
    pins: &BTreeMap<usize, usize>,
) -> Option<f64> {
    let stages = graph.microservices.len();
    let nodes = topology.nodes.len();
    let mut assign = vec![nodes - 1; stages];
    let mut best: Option<f64> = None;
    loop {
        let pinned_ok = pins.iter().all(|(&s, &n)| assign[s] == n);
        if pinned_ok {
            if let Some(c) = oracle_cost(graph, topology, &assign) {
                let v = match objective {
                    OracleObjective::SequentialTotal => c.total,
                    OracleObjective::DcBytes => c.bytes,
                };
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // Decrement a mixed-radix counter whose first digit is stage 0.
        let mut i = 0;
        loop {
            if i == stages {
                return best;
            }
            if assign[i] > 0 {
                assign[i] -= 1;
                break;
            }
            assign[i] = nodes - 1;
            i += 1;
        }
    }
}

/// A random, valid scenario covering every optional section.
pub fn random_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let mut topology = random_topology(rng, 4);
    if topology.nodes.len() < 2 {
        topology = random_topology(rng, 4);
    }
    let mut graph = random_graph(rng, 7);
    graph.id = "explicit".into();

    let templates = (0..rng.gen_range(0..=2))
        .map(|t| {
            let stage = |rng: &mut R, id: String| {
                let mut s = StageSpec::new(id);
                s.demand.ram_mb = rng.gen_range(0.0..500.0);
                s.demand.cpu = rng.gen_range(0.0..1.0);
                s.work = WorkProfile {
                    seconds_per_mb: rng.gen_range(0.0..3.0),
                    fixed_seconds: rng.gen_range(0.0..1.0),
                };
                if rng.gen_bool(0.5) {
                    s.data_out = DataProfile::Ratio(rng.gen_range(0.01..1.0));
                }
                if rng.gen_bool(0.3) {
                    s.required_capabilities = BTreeSet::from([GPU.to_string()]);
                }
                s
            };
            let count = rng.gen_range(1..=4);
            ServiceTemplate {
                id: format!("tpl{t}"),
                kind: *[
                    TemplateKind::ActivityNumerical,
                    TemplateKind::Text,
                    TemplateKind::Image,
                    TemplateKind::Custom,
                ]
                .choose(rng)
                .unwrap(),
                transform_stages: (1..=count)
                    .map(|i| stage(rng, format!("t{t}s{i}")))
                    .collect(),
                learn_stage: stage(rng, format!("t{t}ml")),
                source_size_mb: rng.gen_range(0.5..600.0),
            }
        })
        .collect::<Vec<_>>();

    let mut calibration = BTreeMap::new();
    for t in &templates {
        if rng.gen_bool(0.5) {
            calibration.insert(
                t.learn_stage.id.clone(),
                WorkProfile {
                    seconds_per_mb: rng.gen_range(0.0..60.0),
                    fixed_seconds: rng.gen_range(0.0..30.0),
                },
            );
        }
    }

    let roles = (topology.nodes.len() >= 2 && rng.gen_bool(0.8)).then(|| RoleMap {
        fog_node: topology.nodes[0].id.clone(),
        cloud_node: topology.nodes[1].id.clone(),
        source_node: topology.nodes[0].id.clone(),
    });

    Scenario {
        schema_version: 1,
        comment: rng
            .gen_bool(0.5)
            .then(|| format!("generated case {}", rng.gen::<u32>())),
        topology,
        templates,
        graphs: if rng.gen_bool(0.7) {
            vec![graph]
        } else {
            Vec::new()
        },
        roles,
        calibration,
        options: ScenarioOptions {
            store_to_cloud: rng.gen_bool(0.5),
            residency: if rng.gen_bool(0.5) {
                Residency::Sum
            } else {
                Residency::PeakStage
            },
            theta: rng.gen_range(0.01..0.99),
        },
    }
}
