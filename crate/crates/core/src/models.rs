//! Curvature-operator models along a geodesic.
//!
//! A model is a rule `t ↦ K(t)` giving the Jacobi operator `R(γ', ·)γ'` on
//! `γ'^⊥` in a parallel orthonormal frame. All four example families are
//! covered: constant negative curvature, rank-one symmetric spaces, higher-rank
//! symmetric spaces described by root data, and the conformally perturbed
//! non-Anosov scenario.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::TangentPair;
use crate::error::{Error, Result};
use crate::linalg;

/// Orthonormality tolerance for split bases.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// Eigenvalue gaps at or below this (relative to the operator scale) count as
/// "no splitting".
pub const GAP_TOL: f64 = 1e-12;

/// Upper bound for `max |φ'(u)|` of the mollifier profile (≈ 2.1704).
const MOLLIFIER_SLOPE_BOUND: f64 = 2.2;

/// `exp(1 - 1/(1 - u²))` on `|u| < 1`, zero elsewhere. Peak value 1 at `u = 0`.
pub fn mollifier(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    (1.0 - 1.0 / (1.0 - u * u)).exp()
}

/// Half-width (in units of the bump width) of the super-level set
/// `{u : mollifier(u) > level}` for `level ∈ (0, 1)`.
pub fn mollifier_level_halfwidth(level: f64) -> f64 {
    if level <= 0.0 {
        return 1.0;
    }
    if level >= 1.0 {
        return 0.0;
    }
    // 1 - 1/(1-u²) = ln(level)  =>  1 - u² = 1/(1 - ln level)
    (1.0 - 1.0 / (1.0 - level.ln())).sqrt()
}

/// A compactly supported bump along the orbit: `amplitude · φ((t - center)/width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpSpec {
    pub center: f64,
    pub width: f64,
    /// Raise of the B-block curvature at the peak (1/length²).
    pub amplitude: f64,
}

impl BumpSpec {
    pub fn new(center: f64, width: f64, amplitude: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::param("bump width must be positive and finite"));
        }
        if !center.is_finite() || !amplitude.is_finite() {
            return Err(Error::param("bump center and amplitude must be finite"));
        }
        Ok(Self { center, width, amplitude })
    }

    /// Unit-peak profile χ(t) (without the amplitude).
    pub fn profile(&self, t: f64) -> f64 {
        mollifier((t - self.center) / self.width)
    }

    /// Unit-peak profile repeated with the given period.
    pub fn profile_periodic(&self, t: f64, period: f64) -> f64 {
        let shifted = (t - self.center).rem_euclid(period);
        let offset = if shifted > period / 2.0 { shifted - period } else { shifted };
        mollifier(offset / self.width)
    }
}

/// A restricted root: a linear functional on the flat `R^k` and the dimension of
/// its root space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootDatum {
    pub covector: Vec<f64>,
    pub multiplicity: usize,
}

impl RootDatum {
    pub fn new(covector: Vec<f64>, multiplicity: usize) -> Result<Self> {
        if covector.is_empty() || covector.iter().all(|&c| c == 0.0) {
            return Err(Error::param("root covector must be non-zero"));
        }
        if covector.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("root covector must be finite"));
        }
        if multiplicity == 0 {
            return Err(Error::param("root multiplicity must be positive"));
        }
        Ok(Self { covector, multiplicity })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.covector.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    ConstantCurvature {
        a: f64,
    },
    RankOneSymmetric {
        a: f64,
        r: usize,
    },
    HigherRank {
        roots: Vec<RootDatum>,
        direction: Vec<f64>,
    },
    NonAnosov {
        a: f64,
        r: usize,
        bump: BumpSpec,
        period: f64,
        on_gamma: bool,
    },
    /// An arbitrary constant symmetric operator.
    Fixed {
        operator: DMatrix<f64>,
    },
}

/// The Jacobi operator along one geodesic, in a parallel orthonormal frame of
/// `γ'^⊥` (so `K(t)` is `(n-1) x (n-1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureModel {
    name: String,
    dim_n: usize,
    kind: ModelKind,
}

fn check_rate(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::param(format!("curvature rate a must be positive, got {a}")));
    }
    Ok(())
}

fn check_split_dim(n: usize, r: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::param(format!("dimension n must be at least 3, got {n}")));
    }
    if r < 1 || r > n - 2 {
        return Err(Error::param(format!("r must satisfy 1 <= r <= n-2 = {}, got {r}", n - 2)));
    }
    Ok(())
}

impl CurvatureModel {
    /// Constant sectional curvature `-a²`: `K(t) = -a² Id`.
    pub fn constant_curvature(a: f64, n: usize) -> Result<Self> {
        check_rate(a)?;
        if n < 3 {
            return Err(Error::param(format!("dimension n must be at least 3, got {n}")));
        }
        Ok(Self {
            name: "constant".into(),
            dim_n: n,
            kind: ModelKind::ConstantCurvature { a },
        })
    }

    /// Rank-one symmetric space with curvatures in `[-4a², -a²]`:
    /// `K = diag(-4a² Id_r, -a² Id_{n-1-r})`, parallel along the geodesic.
    pub fn rank_one_symmetric(a: f64, n: usize, r: usize) -> Result<Self> {
        check_rate(a)?;
        check_split_dim(n, r)?;
        Ok(Self {
            name: "rank_one".into(),
            dim_n: n,
            kind: ModelKind::RankOneSymmetric { a, r },
        })
    }

    /// Higher-rank symmetric space along the geodesic with direction `X` in the
    /// flat: eigenvalues `-α(X)²` (with multiplicity) plus `k - 1` zeros.
    pub fn higher_rank(roots: Vec<RootDatum>, direction: Vec<f64>) -> Result<Self> {
        let k = direction.len();
        validate_roots(&roots, k)?;
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::param("direction vector must be non-zero"));
        }
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("direction must be a unit vector, |X| = {norm}")));
        }
        let dim_n = roots.iter().map(|r| r.multiplicity).sum::<usize>() + k;
        Ok(Self {
            name: "higher_rank".into(),
            dim_n,
            kind: ModelKind::HigherRank { roots, direction },
        })
    }

    /// The conformally perturbed rank-one model along a closed orbit of period
    /// `period`: the A-block stays at `-4a²` while the B-block is raised by the
    /// bump, `-a² + h·χ(t)`. With `on_gamma` the orbit is `γ` itself and the
    /// B-block is identically zero.
    pub fn non_anosov(
        a: f64,
        n: usize,
        r: usize,
        bump: BumpSpec,
        period: f64,
        on_gamma: bool,
    ) -> Result<Self> {
        check_rate(a)?;
        check_split_dim(n, r)?;
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::param("period must be positive and finite"));
        }
        if bump.width >= period / 2.0 {
            return Err(Error::param(format!(
                "bump width {} must be below half the period {}",
                bump.width,
                period / 2.0
            )));
        }
        Ok(Self {
            name: if on_gamma { "non_anosov_on_gamma" } else { "non_anosov" }.into(),
            dim_n: n,
            kind: ModelKind::NonAnosov { a, r, bump, period, on_gamma },
        })
    }

    /// Wraps a constant symmetric operator on `R^{n-1}`.
    pub fn fixed(name: impl Into<String>, operator: DMatrix<f64>) -> Result<Self> {
        linalg::require_symmetric(&operator, "curvature operator")?;
        if operator.nrows() < 2 {
            return Err(Error::param("operator must act on at least R^2 (n >= 3)"));
        }
        let operator = (&operator + operator.transpose()) * 0.5;
        Ok(Self {
            name: name.into(),
            dim_n: operator.nrows() + 1,
            kind: ModelKind::Fixed { operator },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    /// Dimension of `γ'^⊥`, i.e. `n - 1`.
    pub fn frame_dim(&self) -> usize {
        self.dim_n - 1
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn period(&self) -> Option<f64> {
        match self.kind {
            ModelKind::NonAnosov { period, on_gamma: false, .. } => Some(period),
            _ => None,
        }
    }

    /// True when `K(t)` does not depend on `t`.
    pub fn is_autonomous(&self) -> bool {
        self.period().is_none()
    }

    /// Characteristic curvature rate (the `a` of the a-parametrized models).
    pub fn scale(&self) -> f64 {
        match &self.kind {
            ModelKind::ConstantCurvature { a }
            | ModelKind::RankOneSymmetric { a, .. }
            | ModelKind::NonAnosov { a, .. } => *a,
            ModelKind::HigherRank { roots, direction } => roots
                .iter()
                .map(|r| r.eval(direction).abs())
                .fold(0.0, f64::max),
            ModelKind::Fixed { operator } => operator.amax().sqrt(),
        }
    }

    /// Declared Lipschitz constant of `t ↦ K(t)` in the max-entry norm.
    pub fn lipschitz(&self) -> f64 {
        match &self.kind {
            ModelKind::NonAnosov { bump, on_gamma: false, .. } => {
                bump.amplitude.abs() * MOLLIFIER_SLOPE_BOUND / bump.width
            }
            _ => 0.0,
        }
    }

    /// Sample times covering the model's `t`-dependence: `[0]` for autonomous
    /// models, a uniform grid over one period otherwise.
    pub fn sample_times(&self, count: usize) -> Vec<f64> {
        match self.period() {
            None => vec![0.0],
            Some(p) => {
                let count = count.max(1);
                (0..count).map(|i| p * i as f64 / count as f64).collect()
            }
        }
    }

    /// `K(t)`, symmetric `(n-1) x (n-1)`.
    pub fn operator(&self, t: f64) -> DMatrix<f64> {
        let d = self.frame_dim();
        match &self.kind {
            ModelKind::ConstantCurvature { a } => DMatrix::identity(d, d) * (-a * a),
            ModelKind::RankOneSymmetric { a, r } => {
                DMatrix::from_diagonal(&rank_one_diagonal(*a, *r, d, -a * a))
            }
            ModelKind::HigherRank { roots, direction } => {
                DMatrix::from_diagonal(&DVector::from_vec(higher_rank_spectrum(roots, direction)))
            }
            ModelKind::NonAnosov { a, r, bump, period, on_gamma } => {
                let b_value = if *on_gamma {
                    0.0
                } else {
                    -a * a + bump.amplitude * bump.profile_periodic(t, *period)
                };
                DMatrix::from_diagonal(&rank_one_diagonal(*a, *r, d, b_value))
            }
            ModelKind::Fixed { operator } => operator.clone(),
        }
    }
}

fn rank_one_diagonal(a: f64, r: usize, d: usize, b_value: f64) -> DVector<f64> {
    DVector::from_fn(d, |i, _| if i < r { -4.0 * a * a } else { b_value })
}

fn higher_rank_spectrum(roots: &[RootDatum], x: &[f64]) -> Vec<f64> {
    let mut diag = Vec::new();
    for root in roots {
        let v = root.eval(x);
        diag.extend(std::iter::repeat_n(-v * v, root.multiplicity));
    }
    diag.extend(std::iter::repeat_n(0.0, x.len() - 1));
    diag
}

fn validate_roots(roots: &[RootDatum], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::param(format!("rank k must be at least 2, got {k}")));
    }
    if roots.is_empty() {
        return Err(Error::param("root list must be non-empty"));
    }
    if let Some(bad) = roots.iter().find(|r| r.covector.len() != k) {
        return Err(Error::param(format!(
            "root covector {:?} does not live on R^{k}",
            bad.covector
        )));
    }
    Ok(())
}

/// A path of unit directions `s ↦ X(s)` in the flat.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionPath {
    Fixed(Vec<f64>),
    /// Great-circle arc from `from` towards `to`; `s` is the angle travelled,
    /// `s ∈ [0, angle(from, to)]`.
    Arc { from: Vec<f64>, to: Vec<f64> },
}

impl DirectionPath {
    pub fn arc(from: Vec<f64>, to: Vec<f64>) -> Result<Self> {
        if from.len() != to.len() {
            return Err(Error::param("path endpoints must have the same dimension"));
        }
        let f = DVector::from_vec(from);
        let t = DVector::from_vec(to);
        if f.norm() == 0.0 || t.norm() == 0.0 {
            return Err(Error::param("path endpoints must be non-zero"));
        }
        let f = f.normalize();
        let t = t.normalize();
        if (&t - &f).norm() < 1e-12 || (&t + &f).norm() < 1e-12 {
            return Err(Error::param("path endpoints must not be (anti)parallel"));
        }
        Ok(DirectionPath::Arc {
            from: f.iter().copied().collect(),
            to: t.iter().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            DirectionPath::Fixed(x) => x.len(),
            DirectionPath::Arc { from, .. } => from.len(),
        }
    }

    /// Parameter range `[0, s_max]`.
    pub fn s_max(&self) -> f64 {
        match self {
            DirectionPath::Fixed(_) => 0.0,
            DirectionPath::Arc { from, to } => {
                let dot: f64 = from.iter().zip(to).map(|(a, b)| a * b).sum();
                dot.clamp(-1.0, 1.0).acos()
            }
        }
    }

    pub fn at(&self, s: f64) -> Vec<f64> {
        match self {
            DirectionPath::Fixed(x) => x.clone(),
            DirectionPath::Arc { from, to } => {
                let f = DVector::from_column_slice(from);
                let t = DVector::from_column_slice(to);
                let perp = (&t - &f * f.dot(&t)).normalize();
                let x = f * s.cos() + perp * s.sin();
                x.iter().copied().collect()
            }
        }
    }

    /// Uniform grid over `[0, s_max]` with spacing at most `spacing`.
    pub fn grid(&self, spacing: f64) -> Vec<f64> {
        let s_max = self.s_max();
        if s_max == 0.0 {
            return vec![0.0];
        }
        let steps = (s_max / spacing).ceil().max(1.0) as usize;
        (0..=steps).map(|i| s_max * i as f64 / steps as f64).collect()
    }
}

/// Higher-rank models along a path of directions in the flat.
#[derive(Debug, Clone, PartialEq)]
pub struct HigherRankFamily {
    roots: Vec<RootDatum>,
    rank: usize,
    path: DirectionPath,
}

impl HigherRankFamily {
    pub fn new(roots: Vec<RootDatum>, rank: usize, path: DirectionPath) -> Result<Self> {
        validate_roots(&roots, rank)?;
        if path.dim() != rank {
            return Err(Error::param(format!(
                "direction path lives in R^{} but the rank is {rank}",
                path.dim()
            )));
        }
        Ok(Self { roots, rank, path })
    }

    pub fn roots(&self) -> &[RootDatum] {
        &self.roots
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn path(&self) -> &DirectionPath {
        &self.path
    }

    pub fn dim_n(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum::<usize>() + self.rank
    }

    pub fn at(&self, s: f64) -> Result<CurvatureModel> {
        CurvatureModel::higher_rank(self.roots.clone(), self.path.at(s))
    }

    /// The eigenvalue `-α_i(X(s))²` carried by each root block, in root order.
    pub fn root_eigenvalues(&self, s: f64) -> Vec<f64> {
        let x = self.path.at(s);
        self.roots
            .iter()
            .map(|r| {
                let v = r.eval(&x);
                -v * v
            })
            .collect()
    }

    /// Locates where the eigenvalue curves of root blocks `i` and `j` cross on
    /// `grid`: returns the refined `s` of the first sign change of
    /// `λ_i(s) - λ_j(s)`, if any.
    pub fn locate_block_crossing(&self, i: usize, j: usize, grid: &[f64]) -> Option<f64> {
        let diff = |s: f64| {
            let e = self.root_eigenvalues(s);
            e[i] - e[j]
        };
        for w in grid.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (mut flo, fhi) = (diff(lo), diff(hi));
            if flo == 0.0 {
                return Some(lo);
            }
            if flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = diff(mid);
                if fm == 0.0 || (hi - lo) < 1e-15 {
                    return Some(mid);
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        None
    }
}

/// The decomposition `v^⊥ = A ⊕ B` with orthonormal bases (as matrix columns in
/// the parallel frame) and the B→A block of `A' = (P_A)'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    basis_a: DMatrix<f64>,
    basis_b: DMatrix<f64>,
    aprime: DMatrix<f64>,
}

impl SplitSpec {
    pub fn new(basis_a: DMatrix<f64>, basis_b: DMatrix<f64>, aprime: DMatrix<f64>) -> Result<Self> {
        let d = basis_a.nrows();
        if basis_b.nrows() != d {
            return Err(Error::contract("A and B bases live in different spaces"));
        }
        if basis_a.ncols() + basis_b.ncols() != d {
            return Err(Error::contract(format!(
                "dim A + dim B = {} + {} must equal {d}",
                basis_a.ncols(),
                basis_b.ncols()
            )));
        }
        if aprime.nrows() != basis_a.ncols() || aprime.ncols() != basis_b.ncols() {
            return Err(Error::contract(format!(
                "A' block must be {}x{}, got {}x{}",
                basis_a.ncols(),
                basis_b.ncols(),
                aprime.nrows(),
                aprime.ncols()
            )));
        }
        let split = Self { basis_a, basis_b, aprime };
        let err = split.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::contract(format!("split bases are not orthonormal (error {err:e})")));
        }
        Ok(split)
    }

    /// `A = span(e_1..e_r)`, `B = span(e_{r+1}..e_d)`, `A' = 0`.
    pub fn coordinate(d: usize, r: usize) -> Result<Self> {
        if r > d {
            return Err(Error::param(format!("r = {r} exceeds dimension {d}")));
        }
        let id = DMatrix::<f64>::identity(d, d);
        Self::new(
            id.columns(0, r).into_owned(),
            id.columns(r, d - r).into_owned(),
            DMatrix::zeros(r, d - r),
        )
    }

    /// `A = v^⊥` (no B part): the degenerate split of the negative-curvature form.
    pub fn full(d: usize) -> Result<Self> {
        Self::coordinate(d, d)
    }

    pub fn with_aprime(&self, aprime: DMatrix<f64>) -> Result<Self> {
        Self::new(self.basis_a.clone(), self.basis_b.clone(), aprime)
    }

    pub fn r(&self) -> usize {
        self.basis_a.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis_a.nrows()
    }

    pub fn dim_b(&self) -> usize {
        self.basis_b.ncols()
    }

    pub fn basis_a(&self) -> &DMatrix<f64> {
        &self.basis_a
    }

    pub fn basis_b(&self) -> &DMatrix<f64> {
        &self.basis_b
    }

    pub fn aprime(&self) -> &DMatrix<f64> {
        &self.aprime
    }

    /// Max-entry deviation of the Gram matrix of `basis_A ∪ basis_B` from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut all = DMatrix::zeros(self.dim(), self.dim());
        all.columns_mut(0, self.r()).copy_from(&self.basis_a);
        all.columns_mut(self.r(), self.dim_b()).copy_from(&self.basis_b);
        let gram = all.transpose() * &all;
        (gram - DMatrix::identity(self.dim(), self.dim())).amax()
    }

    pub fn projection_a(&self) -> DMatrix<f64> {
        &self.basis_a * self.basis_a.transpose()
    }

    pub fn projection_b(&self) -> DMatrix<f64> {
        &self.basis_b * self.basis_b.transpose()
    }

    /// The full symmetric `(P_A)'` rebuilt from its B→A block.
    pub fn projection_derivative(&self) -> DMatrix<f64> {
        let upper = &self.basis_a * &self.aprime * self.basis_b.transpose();
        &upper + upper.transpose()
    }

    /// Max-entry residual of `P_A (P_A)' = (P_A)' P_B`.
    pub fn projection_identity_residual(&self) -> f64 {
        let dp = self.projection_derivative();
        (self.projection_a() * &dp - &dp * self.projection_b()).amax()
    }

    /// Coordinates `(η_A, ς_A, η_B, ς_B)` of a pair relative to the split.
    pub fn split_coords(&self, pair: &TangentPair) -> Result<DVector<f64>> {
        if pair.dim() != self.dim() {
            return Err(Error::contract(format!(
                "pair dimension {} does not match split dimension {}",
                pair.dim(),
                self.dim()
            )));
        }
        let (r, b) = (self.r(), self.dim_b());
        let at = self.basis_a.transpose();
        let bt = self.basis_b.transpose();
        let mut w = DVector::zeros(2 * (r + b));
        w.rows_mut(0, r).copy_from(&(&at * &pair.eta));
        w.rows_mut(r, r).copy_from(&(&at * &pair.sigma));
        w.rows_mut(2 * r, b).copy_from(&(&bt * &pair.eta));
        w.rows_mut(2 * r + b, b).copy_from(&(&bt * &pair.sigma));
        Ok(w)
    }

    /// Inverse of [`SplitSpec::split_coords`].
    pub fn pair_from_coords(&self, w: &DVector<f64>) -> Result<TangentPair> {
        let (r, b) = (self.r(), self.dim_b());
        if w.len() != 2 * (r + b) {
            return Err(Error::contract("split coordinate vector has the wrong length"));
        }
        let eta = &self.basis_a * w.rows(0, r) + &self.basis_b * w.rows(2 * r, b);
        let sigma = &self.basis_a * w.rows(r, r) + &self.basis_b * w.rows(2 * r + b, b);
        Ok(TangentPair::new(eta, sigma))
    }

    /// `K_A = P_A K P_A` and `K_B = P_B K P_B` written in the split bases.
    pub fn restrict(&self, k: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let ka = self.basis_a.transpose() * k * &self.basis_a;
        let kb = self.basis_b.transpose() * k * &self.basis_b;
        (ka, kb)
    }
}

/// Result of [`eigen_split`]: the split, the ascending spectrum, and the gap
/// `λ_(r+1) - λ_(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSplit {
    pub split: SplitSpec,
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
}

impl EigenSplit {
    /// True when the gap vanishes, i.e. A is not determined by the spectrum.
    pub fn is_degenerate(&self) -> bool {
        let scale = self.eigenvalues.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        self.gap <= GAP_TOL * scale
    }
}

/// Splits `v^⊥` into `A` = span of the eigenvectors of the `r` most negative
/// eigenvalues and `B` = the rest, with `A' = 0`.
pub fn eigen_split(k: &DMatrix<f64>, r: usize) -> Result<EigenSplit> {
    linalg::require_symmetric(k, "curvature operator")?;
    let d = k.nrows();
    if r < 1 || r + 1 > d {
        return Err(Error::param(format!("r must satisfy 1 <= r <= {}, got {r}", d.saturating_sub(1))));
    }
    let (eigenvalues, vectors) = linalg::sym_eigen_ascending(k)?;
    let gap = (eigenvalues[r] - eigenvalues[r - 1]).max(0.0);
    let split = SplitSpec::new(
        vectors.columns(0, r).into_owned(),
        vectors.columns(r, d - r).into_owned(),
        DMatrix::zeros(r, d - r),
    )?;
    Ok(EigenSplit { split, eigenvalues, gap })
}

/// The eigen-split of `K(t)` together with `A'` along the flow, obtained from a
/// central difference of the projections `P_A(t ± dt)`. Autonomous models have
/// `A' = 0` exactly.
pub fn moving_split(model: &CurvatureModel, t: f64, r: usize, dt: f64) -> Result<EigenSplit> {
    let base = eigen_split(&model.operator(t), r)?;
    if model.is_autonomous() || base.is_degenerate() {
        return Ok(base);
    }
    let plus = eigen_split(&model.operator(t + dt), r)?;
    let minus = eigen_split(&model.operator(t - dt), r)?;
    let dp = (plus.split.projection_a() - minus.split.projection_a()) / (2.0 * dt);
    let block = base.split.basis_a().transpose() * dp * base.split.basis_b();
    let split = base.split.with_aprime(block)?;
    Ok(EigenSplit { split, ..base })
}

/// First-order curvature change under the conformal metric `e^α g`, with
/// `X = v` a unit vector:
///
/// `K¹ = K - ½ P Hess(α) P - ½ Hess(α)(v, v) Id`,
///
/// where `P` restricts `Hess(α)` to `v^⊥` through the frame of
/// `linalg::complement_frame(v)` (for `v = e_0` that frame is `e_1..e_{n-1}`).
pub fn conformal_perturbation(
    k: &DMatrix<f64>,
    hessian_alpha: &DMatrix<f64>,
    v: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    linalg::require_symmetric(k, "curvature operator")?;
    linalg::require_symmetric(hessian_alpha, "Hess(alpha)")?;
    let n = hessian_alpha.nrows();
    if v.len() != n || k.nrows() + 1 != n {
        return Err(Error::contract(format!(
            "shape mismatch: K is {}x{}, Hess is {n}x{n}, v has {} entries",
            k.nrows(),
            k.ncols(),
            v.len()
        )));
    }
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::contract("v must be a unit vector"));
    }
    let frame = linalg::complement_frame(v);
    let restricted = frame.transpose() * hessian_alpha * &frame;
    let hvv = v.dot(&(hessian_alpha * v));
    let d = n - 1;
    Ok(k - restricted * 0.5 - DMatrix::identity(d, d) * (0.5 * hvv))
}

/// Default `s` spacing used when sampling a direction path.
pub const DEFAULT_PATH_SPACING: f64 = 1e-3;

/// Convenience: the rotation path `(1,0) → (0,1)` on which `s ∈ [0, π/2]`.
pub fn quarter_turn_path() -> DirectionPath {
    DirectionPath::Arc {
        from: vec![1.0, 0.0],
        to: vec![0.0, 1.0],
    }
}
