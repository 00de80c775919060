use dpbft_core::{
    analyze_voting, build_voting_generator, dense_oracle, model, qbd, solve_queue, voting_measures, ModelParams,
    QueueParams,
};

#[test]
fn frozen_single_node_measures() {
    let prm = ModelParams::new(1.0, 1.0, 10.0, 1.0, 0.7, 1, 1).unwrap();
    let m = analyze_voting(&prm).unwrap().measures;
    assert_eq!(model::StateSpace::size_for(prm.lower, prm.upper), 49);
    assert!((m.zeta1 - 0.3839783746168995).abs() < 1e-12, "{}", m.zeta1);
    assert!((m.zeta2 - 0.3300098934302875).abs() < 1e-12, "{}", m.zeta2);
    assert!((m.cannot_vote - 0.0215294413675801).abs() < 1e-12, "{}", m.cannot_vote);
}

#[test]
fn rg_matches_dense_solve_across_sizes() {
    for (l, n) in [(1, 1), (1, 2), (2, 2), (2, 3), (1, 4)] {
        let prm = ModelParams::new(2.0, 2.0, 10.0, 2.0, 0.6, l, n).unwrap();
        let gen = build_voting_generator(&prm).unwrap();
        let rg = qbd::solve(&gen).unwrap();
        let dense = dense_oracle(&gen).unwrap();
        assert!(rg.max_abs_diff(&dense) <= 1e-10, "L={l} N={n}");
        let a = voting_measures(&rg, gen.space().states(), &prm);
        let b = voting_measures(&dense, gen.space().states(), &prm);
        assert!((a.zeta1 - b.zeta1).abs() <= 1e-10);
    }
}

#[test]
fn single_precision_tracks_double() {
    let p64 = ModelParams::new(2.0, 2.0, 10.0, 2.0, 0.6, 1, 2).unwrap();
    let p32 = model::ModelParams::<f32>::new(2.0, 2.0, 10.0, 2.0, 0.6, 1, 2).unwrap();
    let m64 = analyze_voting(&p64).unwrap().measures;
    let m32 = analyze_voting(&p32).unwrap().measures;
    assert!((m32.zeta1 as f64 - m64.zeta1).abs() < 1e-4);
    assert!((m32.zeta2 as f64 - m64.zeta2).abs() < 1e-4);

    let q32 = dpbft_core::queue::QueueParams::<f32>::new(1.0, 5, 0.7, 0.1).unwrap();
    let q64 = QueueParams::new(1.0, 5, 0.7, 0.1).unwrap();
    let s32 = solve_queue(&q32, 1e-6, 100_000).unwrap();
    let s64 = solve_queue(&q64, 1e-12, 100_000).unwrap();
    assert!((s32.eta1 as f64 - s64.eta1).abs() < 1e-4);
}

#[test]
fn saturated_queue_is_refused() {
    // λ + b·r2 equals b·r1 exactly
    let qp = QueueParams::new(6.0, 10, 0.7, 0.1).unwrap();
    assert!(matches!(solve_queue(&qp, 1e-12, 1000), Err(dpbft_core::Error::Unstable { .. })));
}
