use recal_core::{DisplacementGrid, EnvironmentSpec, Hyperparameters, Mode, Scenario};
use recal_harness::{run_batch, run_metrics, run_trace, HarnessError};

fn scenario() -> Scenario {
    let e0 = EnvironmentSpec::ideal(1.0).unwrap();
    let e1 = EnvironmentSpec::new(1.0, -0.3, 1.0).unwrap();
    Scenario::new(e0, vec![(10_000, e1)], 25_000, DisplacementGrid::default()).unwrap()
}

#[test]
fn empty_seed_list_is_rejected() {
    let err = run_batch(
        &scenario(),
        Hyperparameters::PROPOSED,
        &[],
        Mode::Proposed,
        "x",
    )
    .unwrap_err();
    assert!(matches!(err, HarnessError::Invalid(_)));
}

#[test]
fn results_do_not_depend_on_seed_order() {
    let hp = Hyperparameters::PROPOSED;
    let a = run_batch(&scenario(), hp, &[5, 1, 9, 3], Mode::Proposed, "x").unwrap();
    let b = run_batch(&scenario(), hp, &[3, 9, 1, 5], Mode::Proposed, "x").unwrap();
    assert_eq!(a, b);
    let seeds: Vec<u64> = a.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, [1, 3, 5, 9]);
    for r in &a.runs {
        assert_eq!(
            r,
            &run_metrics(&scenario(), hp, Mode::Proposed, r.seed).unwrap()
        );
    }
}

#[test]
fn modes_give_distinct_reproducible_traces() {
    let hp = Hyperparameters::PROPOSED;
    let p1 = run_trace(&scenario(), hp, Mode::Proposed, 7, "x").unwrap();
    let b1 = run_trace(&scenario(), hp, Mode::Baseline, 7, "x").unwrap();
    assert_ne!(p1.records, b1.records);
    assert_eq!(
        p1,
        run_trace(&scenario(), hp, Mode::Proposed, 7, "x").unwrap()
    );
    assert_eq!(
        b1,
        run_trace(&scenario(), hp, Mode::Baseline, 7, "x").unwrap()
    );
    assert!(b1
        .records
        .iter()
        .all(|r| r.phase != recal_core::Phase::Estimating));
}

#[test]
fn summary_statistics_are_consistent() {
    let s = run_batch(
        &scenario(),
        Hyperparameters::PROPOSED,
        &[0, 1, 2, 3, 4],
        Mode::Proposed,
        "x",
    )
    .unwrap();
    assert!((0.0..=1.0).contains(&s.fraction_converged));
    assert!((0.0..=1.0).contains(&s.fraction_detected));
    for r in &s.runs {
        assert_eq!(r.reference, 10_000);
        if let (Some(l), Some(c)) = (r.detection_latency, r.convergence) {
            assert!(c >= l + 1000 + 3000);
        }
    }
    if let (Some(lo), Some(m), Some(hi)) =
        (s.convergence_q25, s.convergence_median, s.convergence_q75)
    {
        assert!(lo <= m && m <= hi);
    }
}
