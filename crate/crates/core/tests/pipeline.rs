mod common;

use netspot::geometry::{bounding_region, snap_events, EventPattern};
use netspot::gibbs::{run, run_chains, SamplerConfig};
use netspot::io;
use netspot::model::{Hyperparams, Prior};
use netspot::posterior::{modal_partition, num_groups_posterior, rand_index, restrict};
use netspot::{aggregate, Execution, Partition};

fn small_dataset() -> (netspot::Dataset, Vec<usize>) {
    let scenario =
        io::read_scenario_file(&common::workspace_root().join("scenarios/small.toml")).unwrap();
    let (network, events, truth) = scenario.generate(scenario.seed.unwrap()).unwrap();
    let region = bounding_region(&network, 0.05).unwrap();
    let dataset = aggregate(&network, &events, &region).unwrap();
    let labels = dataset
        .summaries()
        .iter()
        .map(|s| {
            truth
                .labels
                .iter()
                .find(|(e, _)| *e == s.edge_id)
                .unwrap()
                .1
        })
        .collect();
    (dataset, labels)
}

#[test]
fn small_scenario_has_expected_size() {
    let (dataset, _) = small_dataset();
    assert_eq!(dataset.n(), 14);
    assert!(
        (150..=260).contains(&dataset.total_events()),
        "{}",
        dataset.total_events()
    );
}

#[test]
fn snapping_raw_coordinates_reproduces_assignments() {
    let scenario =
        io::read_scenario_file(&common::workspace_root().join("scenarios/small.toml")).unwrap();
    let (network, events, _) = scenario.generate(1).unwrap();
    let snapped = snap_events(&network, &EventPattern::new(events.events.clone()), 1e-9).unwrap();
    assert_eq!(snapped.assignments, events.assignments);
}

#[test]
fn fit_recovers_planted_clusters() {
    let (dataset, truth) = small_dataset();
    let config = SamplerConfig {
        iterations: 3000,
        burnin: 1000,
        seed: 3,
        hyper: Hyperparams {
            tau: Prior::fixed(1.0),
            ..Hyperparams::default()
        },
        ..SamplerConfig::default()
    };
    let trace = run(&dataset, &config).unwrap();
    assert_eq!(trace.len(), 2000);
    let est = modal_partition(&trace).unwrap();
    let ri = rand_index(&est.partition, &Partition::from_labels(&truth)).unwrap();
    assert!(ri > 0.8, "rand index {ri}");

    let all = restrict(&est, 0.0);
    assert_eq!(all.selected_groups.len(), est.partition.k());
    let post = num_groups_posterior(&trace).unwrap();
    assert!((post.masses.values().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn chains_are_reproducible_and_policy_independent() {
    let (dataset, _) = small_dataset();
    let config = SamplerConfig {
        iterations: 200,
        burnin: 50,
        thin: 3,
        ..SamplerConfig::default()
    };
    let a = run_chains(&dataset, &config, 3, Execution::Sequential).unwrap();
    let b = run_chains(&dataset, &config, 3, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].len(), config.kept());
    assert_ne!(a[0], a[1]);
    let single = run(
        &dataset,
        &SamplerConfig {
            seed: config.seed + 2,
            ..config
        },
    )
    .unwrap();
    assert_eq!(single, a[2]);
}

#[test]
fn trace_files_round_trip() {
    let (dataset, _) = small_dataset();
    let config = SamplerConfig {
        iterations: 100,
        burnin: 20,
        ..SamplerConfig::default()
    };
    let trace = run(&dataset, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    io::write_trace_file(&path, &trace).unwrap();
    assert_eq!(io::read_trace_file(&path).unwrap(), trace);
}
