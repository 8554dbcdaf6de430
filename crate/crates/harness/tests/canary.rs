use cutnmf::data::{generate_synthetic, split_train_test, DatasetSource, DatasetSpec, SyntheticSpec};
use cutnmf::{ObservedRatings, RatingScale};
use cutnmf_harness::study::run_cell;
use cutnmf_harness::{Algorithm, EvalSetKind, ExperimentConfig};

fn config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DatasetSpec::new(DatasetSource::Synthetic, ""), "unused");
    cfg.j_max = 60;
    cfg.trace_every = 20;
    cfg.split = Some(0.8);
    cfg.eval_sets = vec![EvalSetKind::Omega80, EvalSetKind::Theta20];
    cfg.nmf_iterations = Some(60);
    cfg.rnmf.epochs = 5;
    cfg
}

/// Every test rating moved to a different value.
fn sentinel(test: &ObservedRatings) -> ObservedRatings {
    let moved = test.iter().map(|(u, i, r)| (u, i, i64::from(r % 5 + 1)));
    test.with_entries(moved).unwrap()
}

#[test]
fn training_never_sees_the_test_ratings() {
    let data = generate_synthetic(&SyntheticSpec {
        n_users: 40,
        n_items: 60,
        true_rank: 3,
        n_observed: 900,
        seed: 5,
        scale: RatingScale::FIVE_STAR,
    })
    .unwrap();
    let split = split_train_test(&data.ratings, 0.8, 9).unwrap();
    let altered = sentinel(&split.test);
    assert!(split.test.iter().zip(altered.iter()).all(|(a, b)| a.2 != b.2));

    let cfg = config();
    for algo in Algorithm::ALL {
        let clean = run_cell(&cfg, algo, 4, &split.train, Some(&split.test)).unwrap();
        let planted = run_cell(&cfg, algo, 4, &split.train, Some(&altered)).unwrap();
        assert_eq!(clean.factors, planted.factors, "{algo}");
        assert_eq!(
            clean.report(EvalSetKind::Omega80),
            planted.report(EvalSetKind::Omega80),
            "{algo}"
        );
        assert_eq!(clean.trace.len(), planted.trace.len());
        for (x, y) in clean.trace.iter().zip(&planted.trace) {
            assert!(x.errors.same_values(&y.errors) && x.metrics == y.metrics, "{algo}");
        }
        // the sentinel is visible to evaluation only
        assert_ne!(
            clean.report(EvalSetKind::Theta20),
            planted.report(EvalSetKind::Theta20),
            "{algo}"
        );
    }
}
