//! The linearized geodesic flow `η' = ς, ς' = -K(t) η`.
//!
//! Solutions are integrated with classical fixed-step RK4. States of many
//! solutions are stacked as columns of a `2(n-1) x m` matrix, `η` on top of `ς`,
//! so a whole frame is advanced with one matrix product per stage.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::models::CurvatureModel;

pub const DEFAULT_STEP: f64 = 1e-3;

/// A vector of the contact structure in the parallel frame: the Jacobi field
/// value `η = J(t)` and its covariant derivative `ς = J'(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPair {
    pub eta: DVector<f64>,
    pub sigma: DVector<f64>,
}

impl TangentPair {
    pub fn new(eta: DVector<f64>, sigma: DVector<f64>) -> Self {
        debug_assert_eq!(eta.len(), sigma.len());
        Self { eta, sigma }
    }

    pub fn from_slices(eta: &[f64], sigma: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(eta), DVector::from_column_slice(sigma))
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(DVector::zeros(d), DVector::zeros(d))
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    /// Sasaki norm `sqrt(|η|² + |ς|²)`.
    pub fn norm(&self) -> f64 {
        (self.eta.norm_squared() + self.sigma.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.eta.iter().chain(self.sigma.iter()).all(|v| v.is_finite())
    }

    /// `g̃((η₁,ς₁),(η₂,ς₂)) = g(η₁,η₂) + g(ς₁,ς₂)`.
    pub fn pair_metric(&self, other: &TangentPair) -> f64 {
        self.eta.dot(&other.eta) + self.sigma.dot(&other.sigma)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(&self.eta * s, &self.sigma * s)
    }

    pub fn combine(&self, a: f64, other: &TangentPair, b: f64) -> Self {
        Self::new(&self.eta * a + &other.eta * b, &self.sigma * a + &other.sigma * b)
    }

    pub fn to_state(&self) -> DVector<f64> {
        let d = self.dim();
        let mut v = DVector::zeros(2 * d);
        v.rows_mut(0, d).copy_from(&self.eta);
        v.rows_mut(d, d).copy_from(&self.sigma);
        v
    }

    pub fn from_state(v: &DVector<f64>) -> Self {
        let d = v.len() / 2;
        Self::new(v.rows(0, d).into_owned(), v.rows(d, d).into_owned())
    }
}

/// Right-hand side of the Jacobi system: `(ς, -K η)`.
pub fn jacobi_rhs(pair: &TangentPair, k: &DMatrix<f64>) -> Result<TangentPair> {
    if k.nrows() != pair.dim() || k.ncols() != pair.dim() || pair.sigma.len() != pair.dim() {
        return Err(Error::contract(format!(
            "operator is {}x{} but the pair has dimension {}",
            k.nrows(),
            k.ncols(),
            pair.dim()
        )));
    }
    Ok(TangentPair::new(pair.sigma.clone(), -(k * &pair.eta)))
}

/// Exact propagator of the scalar equation `η'' = -λ η` over time `t`, acting on
/// `(η, ς)`.
pub fn closed_form_block(lambda: f64, t: f64) -> Matrix2<f64> {
    if lambda < 0.0 {
        let mu = (-lambda).sqrt();
        let (c, s) = ((mu * t).cosh(), (mu * t).sinh());
        Matrix2::new(c, s / mu, mu * s, c)
    } else if lambda > 0.0 {
        let mu = lambda.sqrt();
        let (s, c) = (mu * t).sin_cos();
        Matrix2::new(c, s / mu, -mu * s, c)
    } else {
        Matrix2::new(1.0, t, 0.0, 1.0)
    }
}

/// Exact propagator of `η'' = -K η` for a constant symmetric `K`, assembled
/// from [`closed_form_block`] in the eigenbasis of `K`. Rows and columns are
/// ordered `(η, ς)`.
pub fn closed_form_propagator(k: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    crate::linalg::require_symmetric(k, "curvature operator")?;
    let d = k.nrows();
    let (values, vectors) = crate::linalg::sym_eigen_ascending(k)?;
    let mut blocks = [DMatrix::zeros(d, d), DMatrix::zeros(d, d), DMatrix::zeros(d, d), DMatrix::zeros(d, d)];
    for (i, &lambda) in values.iter().enumerate() {
        let b = closed_form_block(lambda, t);
        blocks[0][(i, i)] = b[(0, 0)];
        blocks[1][(i, i)] = b[(0, 1)];
        blocks[2][(i, i)] = b[(1, 0)];
        blocks[3][(i, i)] = b[(1, 1)];
    }
    let mut phi = DMatrix::zeros(2 * d, 2 * d);
    let vt = vectors.transpose();
    for (idx, b) in blocks.iter().enumerate() {
        let (row, col) = ((idx / 2) * d, (idx % 2) * d);
        phi.view_mut((row, col), (d, d)).copy_from(&(&vectors * b * &vt));
    }
    Ok(phi)
}

fn stacked_rhs(k: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let d = k.nrows();
    let mut out = DMatrix::zeros(y.nrows(), y.ncols());
    out.rows_mut(0, d).copy_from(&y.rows(d, d));
    out.rows_mut(d, d).copy_from(&(-(k * y.rows(0, d))));
    out
}

/// Fixed-step RK4 for the stacked Jacobi system of one model.
#[derive(Debug, Clone)]
pub struct Rk4 {
    model: CurvatureModel,
    frozen: Option<DMatrix<f64>>,
}

impl Rk4 {
    pub fn new(model: &CurvatureModel) -> Self {
        let frozen = model.is_autonomous().then(|| model.operator(0.0));
        Self { model: model.clone(), frozen }
    }

    pub fn model(&self) -> &CurvatureModel {
        &self.model
    }

    fn operator(&self, t: f64) -> DMatrix<f64> {
        match &self.frozen {
            Some(k) => k.clone(),
            None => self.model.operator(t),
        }
    }

    /// One step of size `h` (possibly negative) from time `t`.
    pub fn step(&self, t: f64, h: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
        let (k0, kh, k1) = match &self.frozen {
            Some(k) => (k.clone(), k.clone(), k.clone()),
            None => (self.operator(t), self.operator(t + 0.5 * h), self.operator(t + h)),
        };
        let s1 = stacked_rhs(&k0, y);
        let s2 = stacked_rhs(&kh, &(y + &s1 * (0.5 * h)));
        let s3 = stacked_rhs(&kh, &(y + &s2 * (0.5 * h)));
        let s4 = stacked_rhs(&k1, &(y + &s3 * h));
        y + (s1 + s2 * 2.0 + s3 * 2.0 + s4) * (h / 6.0)
    }

    /// Advances the stacked state from `t0` to `t1` (either direction) with
    /// uniform steps no larger than `step`.
    pub fn propagate(&self, y0: &DMatrix<f64>, t0: f64, t1: f64, step: f64) -> Result<DMatrix<f64>> {
        let n = step_count(t0, t1, step)?;
        if n == 0 {
            return Ok(y0.clone());
        }
        let h = (t1 - t0) / n as f64;
        let mut y = y0.clone();
        for i in 0..n {
            let t = t0 + h * i as f64;
            y = self.step(t, h, &y);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow { time: t + h });
            }
        }
        Ok(y)
    }
}

/// Number of uniform steps covering `[t0, t1]` with spacing at most `step`.
pub fn step_count(t0: f64, t1: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::param(format!("step must be positive, got {step}")));
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::param("integration times must be finite"));
    }
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(0);
    }
    Ok(((span / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

/// Solution at `t_end` of the Jacobi system started from `pair0` at `t = 0`.
pub fn propagate_rk4(
    model: &CurvatureModel,
    pair0: &TangentPair,
    t_end: f64,
    step: f64,
) -> Result<TangentPair> {
    if t_end < 0.0 {
        return Err(Error::param("t_end must be non-negative; use propagate_span for backward flow"));
    }
    propagate_span(model, pair0, 0.0, t_end, step)
}

/// Solution at `t1` of the Jacobi system with value `pair` at `t0`; `t1 < t0`
/// integrates backward with the time-reversed coefficient schedule.
pub fn propagate_span(
    model: &CurvatureModel,
    pair: &TangentPair,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<TangentPair> {
    if pair.dim() != model.frame_dim() {
        return Err(Error::contract(format!(
            "pair dimension {} does not match model frame dimension {}",
            pair.dim(),
            model.frame_dim()
        )));
    }
    let y0 = DMatrix::from_column_slice(2 * pair.dim(), 1, pair.to_state().as_slice());
    let y = Rk4::new(model).propagate(&y0, t0, t1, step)?;
    Ok(TangentPair::from_state(&y.column(0).into_owned()))
}

/// The linear map `(η₀, ς₀) ↦ (η(t), ς(t))` as a `2(n-1) x 2(n-1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorMatrix {
    pub entries: DMatrix<f64>,
}

impl PropagatorMatrix {
    pub fn apply(&self, pair: &TangentPair) -> TangentPair {
        TangentPair::from_state(&(&self.entries * pair.to_state()))
    }

    /// `max |Φᵀ J Φ - J|` for the canonical form `J = [[0, I], [-I, 0]]`.
    pub fn symplectic_defect(&self) -> f64 {
        let d = self.entries.nrows() / 2;
        let mut j = DMatrix::zeros(2 * d, 2 * d);
        j.view_mut((0, d), (d, d)).fill_with_identity();
        j.view_mut((d, 0), (d, d)).copy_from(&(-DMatrix::<f64>::identity(d, d)));
        (self.entries.transpose() * &j * &self.entries - j).amax()
    }
}

/// Propagator from `0` to `t_end`, column `j` being the solution started from
/// the `j`-th basis pair.
pub fn transition_matrix(model: &CurvatureModel, t_end: f64, step: f64) -> Result<PropagatorMatrix> {
    if t_end < 0.0 {
        return Err(Error::param("t_end must be non-negative"));
    }
    let dim = 2 * model.frame_dim();
    let entries = Rk4::new(model).propagate(&DMatrix::identity(dim, dim), 0.0, t_end, step)?;
    Ok(PropagatorMatrix { entries })
}

/// Symplectic pairing `g(η₁, ς₂) - g(ς₁, η₂)`; constant along solutions.
pub fn wronskian(p1: &TangentPair, p2: &TangentPair) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::contract("wronskian of pairs with different dimensions"));
    }
    Ok(p1.eta.dot(&p2.sigma) - p1.sigma.dot(&p2.eta))
}

/// Magnitude `|η₁||ς₂| + |ς₁||η₂|` of the two products in [`wronskian`]; the
/// rounding error of the pairing scales with it.
pub fn wronskian_scale(p1: &TangentPair, p2: &TangentPair) -> f64 {
    p1.eta.norm() * p2.sigma.norm() + p1.sigma.norm() * p2.eta.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn rhs_examples() {
        let k = diag(&[-4.0, -1.0]);
        let out = jacobi_rhs(&TangentPair::from_slices(&[1.0, 0.0], &[0.0, 0.0]), &k).unwrap();
        assert_eq!(out, TangentPair::from_slices(&[0.0, 0.0], &[4.0, 0.0]));
        let out = jacobi_rhs(&TangentPair::zeros(2), &k).unwrap();
        assert_eq!(out, TangentPair::zeros(2));
        let out = jacobi_rhs(&TangentPair::from_slices(&[0.0, 1.0], &[2.0, 0.0]), &k).unwrap();
        assert_eq!(out, TangentPair::from_slices(&[2.0, 0.0], &[0.0, 1.0]));
    }

    #[test]
    fn rhs_rejects_mismatched_dimensions() {
        let k = diag(&[-4.0, -1.0, -1.0]);
        assert!(matches!(
            jacobi_rhs(&TangentPair::zeros(2), &k),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn closed_form_examples() {
        let b = closed_form_block(-1.0, 1.0);
        assert_abs_diff_eq!(b[(0, 0)], 1.5430806, epsilon = 1e-7);
        assert_abs_diff_eq!(b[(0, 1)], 1.1752012, epsilon = 1e-7);
        assert_abs_diff_eq!(b[(1, 0)], 1.1752012, epsilon = 1e-7);
        assert_eq!(closed_form_block(0.0, 7.0), Matrix2::new(1.0, 7.0, 0.0, 1.0));
        let b = closed_form_block(-4.0, 1.0);
        assert_abs_diff_eq!(b[(0, 0)], 3.7621957, epsilon = 1e-7);
        assert_abs_diff_eq!(b[(0, 1)], 1.8134302, epsilon = 1e-7);
        assert_abs_diff_eq!(b[(1, 0)], 7.2537208, epsilon = 1e-7);
        assert_abs_diff_eq!(b[(1, 1)], 3.7621957, epsilon = 1e-7);
    }

    #[test]
    fn closed_form_blocks_have_unit_determinant() {
        for &lambda in &[-9.0, -1.0, -0.01, 0.0, 0.5, 4.0] {
            let b = closed_form_block(lambda, 1.3);
            assert_abs_diff_eq!(b.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let m = CurvatureModel::rank_one_symmetric(1.0, 4, 2).unwrap();
        let p = TangentPair::from_slices(&[0.1, 0.2, 0.3], &[-1.0, 0.5, 2.0]);
        assert_eq!(propagate_rk4(&m, &p, 0.0, 1e-3).unwrap(), p);
        let phi = transition_matrix(&m, 0.0, 1e-3).unwrap();
        assert_eq!(phi.entries, DMatrix::identity(6, 6));
    }

    #[test]
    fn step_count_lands_on_endpoint() {
        assert_eq!(step_count(0.0, 1.0, 1e-3).unwrap(), 1000);
        assert_eq!(step_count(0.0, 1.0, 0.3).unwrap(), 4);
        assert_eq!(step_count(2.0, -1.0, 0.5).unwrap(), 6);
        assert!(step_count(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn overflow_is_reported_with_time() {
        let m = CurvatureModel::constant_curvature(30.0, 3).unwrap();
        let p = TangentPair::from_slices(&[1.0, 0.0], &[0.0, 0.0]);
        match propagate_rk4(&m, &p, 40.0, 1e-3) {
            Err(Error::Overflow { time }) => assert!(time > 0.0 && time < 40.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn wronskian_examples() {
        let p1 = TangentPair::from_slices(&[1.0, 0.0], &[0.0, 0.0]);
        let p2 = TangentPair::from_slices(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(wronskian(&p1, &p2).unwrap(), 1.0);
        assert_eq!(wronskian(&p1, &p1).unwrap(), 0.0);
        assert!(wronskian(&p1, &TangentPair::zeros(3)).is_err());
    }

    #[test]
    fn closed_form_propagator_of_diagonal_operator() {
        let k = diag(&[-4.0, -1.0]);
        let phi = closed_form_propagator(&k, 1.0).unwrap();
        let b = closed_form_block(-4.0, 1.0);
        assert_abs_diff_eq!(phi[(0, 0)], b[(0, 0)], epsilon = 1e-14);
        assert_abs_diff_eq!(phi[(0, 2)], b[(0, 1)], epsilon = 1e-14);
        assert_abs_diff_eq!(phi[(2, 0)], b[(1, 0)], epsilon = 1e-14);
        assert_eq!(phi[(0, 1)], 0.0);
    }
}
