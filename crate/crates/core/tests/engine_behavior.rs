//! Black-box behavior of the tree engine: snapshot self-consistency,
//! exact descendant counting, window collection, node budgets, and the
//! first-passage identity across seeded replicate batches.

use brw_core::engine::{
    batch_simulate, simulate_tree, stopping_line_identity_check, BrwConfig, EngineError,
    NormalizeMode,
};
use brw_core::galton::OffspringLaw;
use brw_core::norm::compute_norm_seq;
use brw_core::stepfn::StepFunction;
use brw_core::streams::stream_rng;
use brw_core::tail::DisplacementLaw;

fn sublog_config(n: u32, window_min: f64) -> BrwConfig {
    BrwConfig::sublog(
        OffspringLaw::poisson(2.0).unwrap(),
        DisplacementLaw::power_log(1.0, 0.5).unwrap(),
        n,
        window_min,
    )
    .unwrap()
}

#[test]
fn snapshots_are_internally_consistent() {
    let config = sublog_config(10, -1.0);
    let batch = batch_simulate(&config, 200, 31);
    assert_eq!(batch.summary.replicates, 200);
    assert_eq!(batch.summary.capped, 0);
    let mut survivors = 0u64;
    for snap in batch.snapshots.iter().map(|r| r.as_ref().unwrap()) {
        assert_eq!(snap.n, 10);
        if snap.population == 0 {
            assert!(snap.max_position.is_none());
            assert!(snap.window_positions.is_empty());
            assert!(snap.line.is_empty());
            continue;
        }
        survivors += 1;
        let max = snap.max_position.unwrap();
        assert_eq!(
            snap.window_positions.len(),
            snap.window_path_maxima.len()
        );
        for &p in &snap.window_positions {
            assert!(p <= max + 1e-12, "window atom above the recorded max");
            assert!(p > config.collection_floor_raw());
        }
        for rec in &snap.line {
            assert!(rec.descendants >= 1, "pruned record leaked through");
            assert!((1..=10).contains(&rec.depth));
        }
        let d = &snap.diagnostics;
        assert!(d.nodes_visited >= snap.population);
        assert!(
            d.small_path_leaves_in_window + d.mid_path_leaves_in_window
                <= snap.population
        );
    }
    assert_eq!(survivors, batch.summary.survivors);
    assert!(survivors > 150, "poisson-2 survival should be ~80%");
}

#[test]
fn deterministic_descendant_counts_are_exact() {
    let config = BrwConfig::sublog(
        OffspringLaw::deterministic(2).unwrap(),
        DisplacementLaw::power_log(1.0, 0.5).unwrap(),
        9,
        -1.0,
    )
    .unwrap();
    let batch = batch_simulate(&config, 100, 77);
    let mut seen_records = 0u64;
    for snap in batch.snapshots.iter().map(|r| r.as_ref().unwrap()) {
        assert_eq!(snap.population, 512);
        for rec in &snap.line {
            // Every generation-n descendant of the crossing vertex counts.
            assert_eq!(rec.descendants, 1u64 << (9 - rec.depth));
            seen_records += 1;
        }
    }
    assert!(seen_records > 0, "no first-passage records in 100 trees");
}

#[test]
fn node_budget_aborts_and_is_reported() {
    let config = sublog_config(14, -1.0).with_node_cap(500).unwrap();
    let batch = batch_simulate(&config, 50, 5);
    assert!(batch.summary.capped > 25, "most poisson-2 trees exceed 500 nodes");
    let mut saw_cap_error = false;
    for snap in &batch.snapshots {
        match snap {
            Err(EngineError::NodeCapExceeded { cap }) => {
                assert_eq!(*cap, 500);
                saw_cap_error = true;
            }
            Err(other) => panic!("unexpected error {other}"),
            Ok(s) => assert!(s.diagnostics.nodes_visited <= 500),
        }
    }
    assert!(saw_cap_error);
    assert!(BrwConfig::sublog(
        OffspringLaw::deterministic(2).unwrap(),
        DisplacementLaw::power_log(1.0, 0.5).unwrap(),
        8,
        -1.0,
    )
    .unwrap()
    .with_node_cap(0)
    .is_err());
}

#[test]
fn identity_holds_on_applicable_seeded_trees_in_both_regimes() {
    let offspring = OffspringLaw::poisson(2.0).unwrap();
    let suplog_law = DisplacementLaw::lognormal();
    let norms = compute_norm_seq(&suplog_law, 2.0, 12, 0.2, 0.5, 0.0).unwrap();
    let suplog =
        BrwConfig::suplog(offspring.clone(), suplog_law, norms, -0.55).unwrap();
    let sublog = BrwConfig::sublog(
        offspring,
        DisplacementLaw::power_log(1.0, 0.5).unwrap(),
        12,
        -0.5,
    )
    .unwrap();
    let f = StepFunction::new(vec![-0.4, 0.6, 1.8], vec![1.0, 0.25, 2.0]).unwrap();

    for (name, config) in [("suplog", suplog), ("sublog", sublog)] {
        let mut applicable = 0u32;
        let mut reported = 0u32;
        for seed in 0..40u64 {
            let mut rng = stream_rng(seed, 1, 0);
            let snap = simulate_tree(&config, &mut rng).unwrap();
            match stopping_line_identity_check(&config, &snap, &f) {
                Ok((lhs, rhs)) => {
                    let scale = lhs.abs().max(rhs.abs()).max(1.0);
                    assert!(
                        (lhs - rhs).abs() <= 1e-9 * scale,
                        "{name} seed {seed}: lhs {lhs} rhs {rhs}"
                    );
                    applicable += 1;
                }
                Err(EngineError::IdentityNotApplicable { .. }) => reported += 1,
                Err(other) => panic!("{name} seed {seed}: {other}"),
            }
        }
        assert_eq!(applicable + reported, 40, "{name}: silent skip");
        assert!(applicable >= 20, "{name}: only {applicable}/40 applicable");
    }
}

#[test]
fn identity_rejects_test_functions_reaching_below_the_floor() {
    let config = sublog_config(8, 0.0);
    let mut rng = stream_rng(3, 1, 0);
    let snap = simulate_tree(&config, &mut rng).unwrap();
    // Support starts at -0.5 < window floor 0.0: leaves in [-0.5, 0] were
    // never collected, so the identity cannot be evaluated.
    let f = StepFunction::new(vec![-0.5, 1.0], vec![1.0, 2.0]).unwrap();
    assert!(matches!(
        stopping_line_identity_check(&config, &snap, &f),
        Err(EngineError::TestFunctionBelowFloor { .. })
    ));
}

#[test]
fn batches_are_replicate_stable_under_concatenation() {
    // Replicate i derives its stream from (seed, i) alone, so prefixes of
    // a longer batch coincide bit-for-bit with a shorter one.
    let config = sublog_config(9, -1.0);
    let short = batch_simulate(&config, 40, 99);
    let long = batch_simulate(&config, 80, 99);
    for (a, b) in short.snapshots.iter().zip(long.snapshots.iter().take(40)) {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        assert_eq!(
            serde_json::to_string(a).unwrap(),
            serde_json::to_string(b).unwrap()
        );
    }
}

#[test]
fn normalization_modes_match_engine_scaling() {
    let law = DisplacementLaw::lognormal();
    let norms = compute_norm_seq(&law, 2.0, 10, 0.1, 10.0, 0.0).unwrap();
    let config = BrwConfig::suplog(
        OffspringLaw::deterministic(2).unwrap(),
        law.clone(),
        norms,
        -2.0,
    )
    .unwrap();
    let mut rng = stream_rng(8, 1, 0);
    let snap = simulate_tree(&config, &mut rng).unwrap();
    assert!(!snap.window_positions.is_empty());
    let by_config: Vec<f64> = snap
        .window_positions
        .iter()
        .map(|&p| config.normalized(p))
        .collect();
    let by_mode = brw_core::engine::normalize_positions(
        &snap.window_positions,
        NormalizeMode::Additive {
            center: norms.b,
            scale: norms.a,
        },
    )
    .unwrap();
    for (a, b) in by_config.iter().zip(by_mode.iter()) {
        assert_eq!(a, b);
    }

    let sub = sublog_config(10, -1.0);
    let mut rng = stream_rng(9, 1, 0);
    let snap = simulate_tree(&sub, &mut rng).unwrap();
    if !snap.window_positions.is_empty() {
        let by_config: Vec<f64> = snap
            .window_positions
            .iter()
            .map(|&p| sub.normalized(p))
            .collect();
        let by_mode = brw_core::engine::normalize_positions(
            &snap.window_positions,
            NormalizeMode::LogScale {
                law: &sub.displacement,
                level: 10.0 * 2f64.ln(),
            },
        )
        .unwrap();
        for (a, b) in by_config.iter().zip(by_mode.iter()) {
            assert_eq!(a, b);
        }
    }
}
