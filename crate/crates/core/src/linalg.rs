use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const SYMMETRY_TOL: f64 = 1e-12;

pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn require_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::contract(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::contract(format!("{what} is not symmetric (|M - M^T| = {asym:e})")));
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
/// Columns of the returned matrix are the matching unit eigenvectors.
pub(crate) fn sym_eigen_ascending(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigen-solver did not converge".into()))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // ties broken by index so that results are reproducible
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap()
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let (values, _) = sym_eigen_ascending(m)?;
    values
        .first()
        .copied()
        .ok_or_else(|| Error::contract("empty matrix has no eigenvalues"))
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

/// Orthonormal completion of a unit vector `v` in `R^n`: an `n x (n-1)` matrix
/// whose columns span `v^⊥`. Built by Gram–Schmidt over the standard basis,
/// dropping the basis vector most parallel to `v`; for `v = e_0` the result is
/// `(e_1, …, e_{n-1})`.
pub(crate) fn complement_frame(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let drop = (0..n)
        .max_by(|&i, &j| v[i].abs().partial_cmp(&v[j].abs()).unwrap().then(j.cmp(&i)))
        .unwrap_or(0);
    let mut basis: Vec<DVector<f64>> = vec![v.clone()];
    for k in (0..n).filter(|&k| k != drop) {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        for b in &basis {
            let proj = b.dot(&e);
            e -= b * proj;
        }
        let norm = e.norm();
        e /= norm;
        basis.push(e);
    }
    let mut frame = DMatrix::zeros(n, n - 1);
    for (col, b) in basis.iter().skip(1).enumerate() {
        frame.set_column(col, b);
    }
    frame
}

pub(crate) fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// `max_ν λ_min(S - ν Q)` over `ν ∈ [lo, hi]`. The function is concave in ν,
/// so a golden-section search converges to the global maximum. By the
/// S-lemma this equals `min { wᵀSw : |w| = 1, wᵀQw = 0 }` when `Q` is
/// indefinite and the bracket contains the maximizer.
pub(crate) fn lagrangian_dual_bound(
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let phi = |nu: f64| min_eigenvalue(&(s - q * nu));
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = phi(x1)?;
    let mut f2 = phi(x2)?;
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = phi(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = phi(x1)?;
        }
    }
    Ok(f1.max(f2).max(phi(lo)?).max(phi(hi)?))
}
