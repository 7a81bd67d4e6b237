use nalgebra::DMatrix;
use proptest::prelude::*;

use curvph::dynamics::{
    self, closed_form_propagator, propagate_rk4, propagate_span, transition_matrix, wronskian, wronskian_scale,
    TangentPair,
};
use curvph::models::{BumpSpec, CurvatureModel};

mod common;
use common::{diag, exact_block};

fn pair(v: &[f64]) -> TangentPair {
    let d = v.len() / 2;
    TangentPair::from_slices(&v[..d], &v[d..])
}

fn sym3(vals: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_iterator(3, 3, vals.iter().copied());
    (&m + m.transpose()) * 0.5
}

#[test]
fn closed_form_matches_scalar_formulas() {
    for lambda in [-4.0, -1.0, 0.0, 0.5, 2.0] {
        let phi = closed_form_propagator(&diag(&[lambda]), 1.7).unwrap();
        let b = exact_block(lambda, 1.7);
        for i in 0..2 {
            for j in 0..2 {
                assert!((phi[(i, j)] - b[i][j]).abs() <= 1e-12 * b[i][j].abs().max(1.0));
            }
        }
    }
}

#[test]
fn rk4_matches_closed_form_at_largest_default_norm() {
    let k = diag(&[-16.0, -4.0, -1.0]);
    let model = CurvatureModel::fixed("a=2", k.clone()).unwrap();
    let phi = transition_matrix(&model, 5.0, 1e-3).unwrap();
    let exact = closed_form_propagator(&k, 5.0).unwrap();
    let rel = (&phi.entries - &exact).amax() / exact.amax();
    assert!(rel <= 1e-10, "relative error {rel}");
}

#[test]
fn on_gamma_flat_block_is_constant() {
    let m = CurvatureModel::non_anosov(1.0, 3, 1, BumpSpec::new(5.0, 1.0, 1.0).unwrap(), 20.0, true).unwrap();
    let p = propagate_rk4(&m, &TangentPair::from_slices(&[0.0, 1.0], &[0.0, 0.0]), 10.0, 1e-3).unwrap();
    assert!((p.eta[1] - 1.0).abs() <= 1e-12 && p.sigma[1].abs() <= 1e-12);
}

#[test]
fn transition_matrix_is_symplectic() {
    let m = CurvatureModel::non_anosov(1.0, 4, 2, BumpSpec::new(1.0, 0.8, 1.0).unwrap(), 4.0, false).unwrap();
    let phi = transition_matrix(&m, 3.0, 1e-3).unwrap();
    assert!(phi.symplectic_defect() <= 1e-9 * phi.entries.amax().powi(2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wronskian_is_conserved(
        kv in prop::collection::vec(-3.0..3.0f64, 9),
        a in prop::collection::vec(-1.0..1.0f64, 6),
        b in prop::collection::vec(-1.0..1.0f64, 6),
    ) {
        let k = sym3(&kv);
        let model = CurvatureModel::fixed("random", k).unwrap();
        let (p1, p2) = (pair(&a), pair(&b));
        let w0 = wronskian(&p1, &p2).unwrap();
        let (mut q1, mut q2) = (p1, p2);
        for i in 0..10 {
            q1 = propagate_span(&model, &q1, i as f64, (i + 1) as f64, 1e-3).unwrap();
            q2 = propagate_span(&model, &q2, i as f64, (i + 1) as f64, 1e-3).unwrap();
            let drift = (wronskian(&q1, &q2).unwrap() - w0).abs();
            let scale = wronskian_scale(&q1, &q2).max(1.0);
            prop_assert!(drift <= 1e-9 * scale, "drift {drift}, scale {scale}");
        }
    }

    #[test]
    fn propagation_is_linear(
        a in prop::collection::vec(-1.0..1.0f64, 4),
        b in prop::collection::vec(-1.0..1.0f64, 4),
        s in -2.0..2.0f64,
        u in -2.0..2.0f64,
        t in 0.0..3.0f64,
    ) {
        let m = CurvatureModel::non_anosov(1.0, 3, 1, BumpSpec::new(1.0, 0.5, 1.0).unwrap(), 3.0, false).unwrap();
        let (w1, w2) = (pair(&a), pair(&b));
        let lhs = propagate_rk4(&m, &w1.combine(s, &w2, u), t, 1e-3).unwrap();
        let rhs = propagate_rk4(&m, &w1, t, 1e-3).unwrap().combine(s, &propagate_rk4(&m, &w2, t, 1e-3).unwrap(), u);
        let err = (lhs.to_state() - rhs.to_state()).amax();
        prop_assert!(err <= 1e-10 * lhs.norm().max(1.0), "err {err}");
    }

    #[test]
    fn time_reversal_returns_the_initial_pair(a in prop::collection::vec(-1.0..1.0f64, 4), t in 0.0..3.0f64, t0 in 0.0..5.0f64) {
        let m = CurvatureModel::non_anosov(1.0, 3, 1, BumpSpec::new(1.0, 0.5, 1.0).unwrap(), 3.0, false).unwrap();
        let w = pair(&a);
        let forward = propagate_span(&m, &w, t0, t0 + t, 1e-3).unwrap();
        let back = propagate_span(&m, &forward, t0 + t, t0, 1e-3).unwrap();
        prop_assert!((back.to_state() - w.to_state()).amax() <= 1e-8);
    }

    #[test]
    fn rhs_is_linear_in_the_pair(a in prop::collection::vec(-1.0..1.0f64, 4), s in -3.0..3.0f64) {
        let k = diag(&[-4.0, -1.0]);
        let w = pair(&a);
        let f = dynamics::jacobi_rhs(&w.scaled(s), &k).unwrap();
        let g = dynamics::jacobi_rhs(&w, &k).unwrap().scaled(s);
        prop_assert!((f.to_state() - g.to_state()).amax() <= 1e-12);
    }
}
