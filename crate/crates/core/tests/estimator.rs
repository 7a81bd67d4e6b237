use proptest::prelude::*;

use curvph::criterion::{self, CheckOptions, QFormParams, Verdict};
use curvph::dynamics::TangentPair;
use curvph::estimator::{
    cone_invariance_from, cone_invariance_test, default_gap_threshold, lyapunov_spectrum, splitting_dims,
    time_in_bad_set, BadSetRule, ConeOptions, LyapunovOptions, SplittingVerdict,
};
use curvph::models::{BumpSpec, CurvatureModel};
use curvph::Error;

mod common;
use common::diag;

fn on_gamma() -> CurvatureModel {
    CurvatureModel::non_anosov(1.0, 3, 1, BumpSpec::new(5.0, 0.5, 1.0).unwrap(), 10.0, true).unwrap()
}

#[test]
fn constant_curvature_exponents() {
    let m = CurvatureModel::constant_curvature(1.0, 3).unwrap();
    let rep = lyapunov_spectrum(&m, &LyapunovOptions::new(50.0, 1)).unwrap();
    for (x, e) in rep.exponents.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
        assert!((x - e).abs() <= 0.01, "{:?}", rep.exponents);
    }
    let dims = splitting_dims(&rep, 0.5).unwrap();
    assert_eq!(dims.verdict, SplittingVerdict::AnosovLike);
    assert_eq!(dims.as_tuple(), (2, 0, 2));
}

#[test]
fn block_exponents_recovered() {
    for lambdas in [vec![-16.0, -1.0], vec![-2.25, -0.25, -0.25], vec![-9.0, -4.0, -1.0]] {
        let m = CurvatureModel::fixed("blocks", diag(&lambdas)).unwrap();
        let rep = lyapunov_spectrum(&m, &LyapunovOptions::new(50.0, 2)).unwrap();
        let mut expected: Vec<f64> = lambdas.iter().flat_map(|l| [-(-l).sqrt(), (-l).sqrt()]).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, e) in rep.exponents.iter().zip(&expected) {
            assert!(((x - e) / e).abs() <= 0.01, "{:?} vs {expected:?}", rep.exponents);
        }
    }
}

#[test]
fn exponent_symmetry_within_residual() {
    let models = [
        CurvatureModel::rank_one_symmetric(1.0, 4, 2).unwrap(),
        on_gamma(),
        CurvatureModel::non_anosov(1.0, 3, 1, BumpSpec::new(5.0, 0.5, 1.0).unwrap(), 10.0, false).unwrap(),
    ];
    for m in &models {
        let rep = lyapunov_spectrum(m, &LyapunovOptions::new(60.0, 4)).unwrap();
        let defect = rep.symmetry_defect();
        assert!(defect <= 2.0 * rep.residual + 1e-12, "{}: defect {defect}, residual {}", m.name(), rep.residual);
    }
}

#[test]
fn on_gamma_splitting_is_one_two_one() {
    let m = on_gamma();
    let rep = lyapunov_spectrum(&m, &LyapunovOptions::new(50.0, 1)).unwrap();
    let dims = splitting_dims(&rep, default_gap_threshold(&m)).unwrap();
    assert_eq!(dims.as_tuple(), (1, 2, 1));
    assert_eq!(dims.verdict, SplittingVerdict::PartiallyHyperbolic);
}

#[test]
fn lyapunov_overflow_asks_for_a_shorter_period() {
    let m = CurvatureModel::fixed("steep", diag(&[-40000.0, -1.0])).unwrap();
    let mut opts = LyapunovOptions::new(100.0, 1);
    opts.reorth_period = 5.0;
    opts.step = 1e-4;
    match lyapunov_spectrum(&m, &opts) {
        Err(Error::Numeric(msg)) => assert!(msg.contains("reduce")),
        other => panic!("expected overflow error, got {other:?}"),
    }
}

#[test]
fn rank_one_cones_are_retained() {
    let m = CurvatureModel::rank_one_symmetric(1.0, 4, 2).unwrap();
    let rep = cone_invariance_test(&m, 2, &QFormParams::new(1.5).unwrap(), &ConeOptions::new(10.0, 500, 3)).unwrap();
    assert_eq!(rep.fraction_retained, 1.0);
    assert!(rep.min_exit_time.is_none());
    assert!(rep.contraction_stat > 0.0);
}

#[test]
fn escaping_sample_from_the_argmin() {
    let m = CurvatureModel::rank_one_symmetric(1.0, 4, 2).unwrap();
    let params = QFormParams::new(4.0).unwrap();
    let rep = criterion::criterion_check(&m, 2, &params, &CheckOptions::new(5000, 7)).unwrap();
    assert_eq!(rep.verdict, Verdict::Fail);
    let arg = rep.argmin.unwrap();
    let mut w = TangentPair::from_slices(&arg.eta, &arg.sigma);
    // push slightly into the positive cone along g(η_A, ς_A)
    for i in 0..2 {
        w.sigma[i] += 1e-6 * w.eta[i];
    }
    let cones = cone_invariance_from(&m, 2, &params, &ConeOptions::new(10.0, 1, 0), &[w]).unwrap();
    assert!(cones.fraction_retained < 1.0);
    assert!(cones.min_exit_time.unwrap() < 1.0);
}

#[test]
fn criterion_pass_implies_retention() {
    let bump = BumpSpec::new(5.0, 0.5, 1.0).unwrap();
    let models = [
        (CurvatureModel::rank_one_symmetric(1.0, 4, 2).unwrap(), 2, 1.5),
        (CurvatureModel::rank_one_symmetric(1.0, 4, 1).unwrap(), 1, 3.0),
        (CurvatureModel::non_anosov(1.0, 3, 1, bump, 10.0, false).unwrap(), 1, 1.5),
        (on_gamma(), 1, 1.0),
    ];
    for (m, r, c) in &models {
        let params = QFormParams::new(*c).unwrap();
        let check = criterion::criterion_check(m, *r, &params, &CheckOptions::new(500, 2)).unwrap();
        assert_eq!(check.verdict, Verdict::Pass, "{}", m.name());
        let cones = cone_invariance_test(m, *r, &params, &ConeOptions::new(20.0, 500, 2)).unwrap();
        assert_eq!(cones.fraction_retained, 1.0, "{}", m.name());
    }
}

#[test]
fn bad_set_examples() {
    let rank_one = CurvatureModel::rank_one_symmetric(1.0, 4, 2).unwrap();
    let crit = BadSetRule::Criterion { r: 2, params: QFormParams::new(1.5).unwrap(), count: 500, seed: 1 };
    assert_eq!(time_in_bad_set(&rank_one, &crit, 10.0, 0.1).unwrap().fraction, 0.0);
    assert_eq!(time_in_bad_set(&rank_one, &BadSetRule::Pinching { beta: 0.5 }, 10.0, 0.1).unwrap().fraction, 0.0);
    let g = on_gamma();
    assert_eq!(time_in_bad_set(&g, &BadSetRule::Pinching { beta: 0.5 }, 10.0, 0.1).unwrap().fraction, 1.0);
    let crit = BadSetRule::Criterion { r: 1, params: QFormParams::new(1.5).unwrap(), count: 500, seed: 1 };
    assert_eq!(time_in_bad_set(&g, &crit, 10.0, 0.1).unwrap().fraction, 0.0);
    assert!(matches!(time_in_bad_set(&g, &crit, 10.0, 0.0), Err(Error::Parameter(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bad_set_shrinks_with_amplitude(h1 in 0.0..1.0f64, h2 in 0.0..1.0f64, beta in 0.2..0.9f64) {
        let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
        let frac = |h: f64| {
            let m = CurvatureModel::non_anosov(1.0, 3, 1, BumpSpec::new(5.0, 1.0, h).unwrap(), 10.0, false).unwrap();
            time_in_bad_set(&m, &BadSetRule::Pinching { beta }, 20.0, 0.01).unwrap().fraction
        };
        prop_assert!(frac(lo) <= frac(hi));
        prop_assert_eq!(frac(0.0), 0.0);
    }

    #[test]
    fn splitting_cluster_sizes_add_up(mut ex in prop::collection::vec(-3.0..3.0f64, 2..10), thr in 0.05..1.0f64) {
        ex.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rep = curvph::estimator::LyapunovReport {
            model: "p".into(), exponents: ex.clone(), t_used: 1.0, reorth_period: 0.1, transient: 0.0, residual: 0.0,
        };
        let d = splitting_dims(&rep, thr).unwrap();
        prop_assert_eq!(d.stable + d.center + d.unstable, ex.len());
        prop_assert_eq!(d.cluster_sizes.iter().sum::<usize>(), ex.len());
    }
}
