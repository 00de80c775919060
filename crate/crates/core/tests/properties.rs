use dpbft_core::{
    analyze_voting, build_voting_generator, solve_queue, stability_check, ModelParams, QueueParams, Stability,
};
use proptest::prelude::*;

fn model_params() -> impl Strategy<Value = ModelParams> {
    (0.2f64..5.0, 0.2f64..5.0, 0.5f64..30.0, 0.2f64..5.0, 0.05f64..0.95, 1usize..=2, 0usize..=1)
        .prop_map(|(mu, theta, gamma, beta, p, l, extra)| {
            ModelParams::new(mu, theta, gamma, beta, p, l, l + extra).unwrap()
        })
}

fn stable_queue() -> impl Strategy<Value = QueueParams> {
    (1usize..=20, 0.1f64..2.0, 0.0f64..0.9, 0.05f64..0.95).prop_map(|(b, r1, frac, load)| {
        let r2 = r1 * frac;
        let lambda = load * b as f64 * (r1 - r2);
        QueueParams::new(lambda, b, r1, r2).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_is_conservative_and_irreducible(prm in model_params()) {
        let gen = build_voting_generator(&prm).unwrap();
        let q = gen.matrix();
        for s in q.row_sums() {
            prop_assert!(s.abs() <= 1e-12);
        }
        for (i, j, v) in q.triplets() {
            prop_assert!(i == j || v >= 0.0);
            let space = gen.space();
            prop_assert!(space.level_of(space.state(i)).abs_diff(space.level_of(space.state(j))) <= 1);
        }
        prop_assert!(gen.is_irreducible());
    }

    #[test]
    fn measures_partition_unity(prm in model_params()) {
        let a = analyze_voting(&prm).unwrap();
        let m = a.measures;
        prop_assert!(a.distribution.pi.iter().all(|&x| x >= -1e-14));
        prop_assert!((a.distribution.total() - 1.0).abs() <= 1e-12);
        prop_assert!((m.completed + m.cannot_vote + m.in_progress - 1.0).abs() <= 1e-12);
        prop_assert_eq!(m.r1, prm.beta * m.zeta1);
        prop_assert_eq!(m.r2, prm.beta * m.zeta2);
        prop_assert!(a.distribution.residual(a.generator.matrix()) <= 1e-10);
    }

    #[test]
    fn drift_identity_holds(qp in stable_queue()) {
        prop_assert_eq!(stability_check(&qp), Stability::Stable);
        let sol = solve_queue(&qp, 1e-12, 1_000_000).unwrap();
        let b = qp.b as f64;
        let scale = qp.lambda + b * qp.r2;
        prop_assert!((scale - b * qp.r1 * sol.eta2).abs() <= 1e-8 * scale.max(1.0));
        prop_assert!((sol.eta1 + sol.eta2 - 1.0).abs() <= 1e-10);
        prop_assert!((sol.throughput - scale).abs() <= 1e-8 * scale.max(1.0));
    }

    #[test]
    fn unit_batch_is_geometric(r1 in 0.1f64..3.0, frac in 0.0f64..0.5, load in 0.05f64..0.9) {
        let r2 = r1 * frac;
        let lambda = load * r1 - r2;
        prop_assume!(lambda > 0.0);
        let qp = QueueParams::new(lambda, 1, r1, r2).unwrap();
        let sol = solve_queue(&qp, 1e-13, 1_000_000).unwrap();
        let rho = (lambda + r2) / r1;
        for i in 0..10 {
            let want = (1.0 - rho) * rho.powi(i);
            prop_assert!((sol.level(i as usize)[0] - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn classifier_matches_drift_sign(b in 1usize..=300, r1 in 0.01f64..2.0, r2 in 0.0f64..2.0, lambda in 0.01f64..50.0) {
        let qp = QueueParams::new(lambda, b, r1, r2).unwrap();
        let bf = b as f64;
        let stable = lambda + r2 * bf < r1 * bf;
        prop_assert_eq!(stability_check(&qp) == Stability::Stable, stable);
    }
}
