mod support;

use std::collections::BTreeMap;

use fogsim::cost::{evaluate, TimingSemantics};
use fogsim::optimizer::{
    optimize_exhaustive, optimize_exhaustive_parallel, optimize_greedy, Objective, OptimizeError,
    PlacementProblem,
};
use fogsim::placement::Residency;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{oracle_cost, oracle_optimum, random_graph, random_topology, OracleObjective};

const INSTANCES: u64 = 250;

#[test]
fn exhaustive_matches_brute_force_and_bounds_greedy() {
    let mut feasible = 0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graph = random_graph(&mut rng, 8);
        let topology = random_topology(&mut rng, 5);
        let (objective, oracle_objective) = if rng.gen_bool(0.75) {
            (
                Objective::TotalTimeSequential,
                OracleObjective::SequentialTotal,
            )
        } else {
            (Objective::DcBytes, OracleObjective::DcBytes)
        };
        let mut problem = PlacementProblem::new(&graph, &topology, objective);
        let mut pins = BTreeMap::new();
        if rng.gen_bool(0.3) {
            problem = problem.pin(
                graph.microservices[0].id.clone(),
                topology.nodes[0].id.clone(),
            );
            pins.insert(0, 0);
        }

        let expected = oracle_optimum(&graph, &topology, oracle_objective, &pins);
        let exhaustive = optimize_exhaustive(&problem);
        match (expected, &exhaustive) {
            (None, Err(OptimizeError::NoFeasiblePlacement)) => {}
            (Some(best), Ok(result)) => {
                feasible += 1;
                assert_eq!(result.objective_value, best, "seed {seed}");
                // The returned placement is itself feasible and scores as claimed.
                let cost = evaluate(
                    &graph,
                    &result.placement,
                    &topology,
                    TimingSemantics::Sequential,
                    Residency::Sum,
                )
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
                assert_eq!(cost, result.cost, "seed {seed}");
                let assign: Vec<usize> = graph
                    .microservices
                    .iter()
                    .map(|m| {
                        topology
                            .node_index(result.placement.node_of(&m.id).unwrap())
                            .unwrap()
                    })
                    .collect();
                assert!(
                    oracle_cost(&graph, &topology, &assign).is_some(),
                    "seed {seed}"
                );
            }
            (expected, got) => panic!("seed {seed}: oracle {expected:?}, optimizer {got:?}"),
        }

        if let Ok(greedy) = optimize_greedy(&problem) {
            let optimum = exhaustive
                .as_ref()
                .expect("greedy found a placement")
                .objective_value;
            assert!(greedy.objective_value >= optimum, "seed {seed}");
        }

        assert_eq!(
            optimize_exhaustive_parallel(&problem),
            exhaustive,
            "seed {seed}"
        );
    }
    assert!(
        feasible >= INSTANCES / 4,
        "only {feasible} feasible instances"
    );
}
