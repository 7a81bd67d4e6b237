//! The quadratic form `Q^c`, its derivative matrix `S^c`, cone sampling and the
//! positivity criterion.
//!
//! Coordinates relative to a split are ordered `(η_A, ς_A, η_B, ς_B)`. In those
//! coordinates
//!
//! ```text
//! Q^c(w)     = g(η_A, ς_A) - c² |η_B|² - |ς_B|²
//! d/dt Q^c   = wᵀ S^c w
//!
//!        | -K_A     0      c²A'      ½A'        |
//! S^c =  |  0       Id     ½A'       A'         |
//!        |  c²A'ᵀ   ½A'ᵀ   0         -c²Id + K_B|
//!        |  ½A'ᵀ    A'ᵀ    -c²Id+K_B  0         |
//! ```
//!
//! where `A'` is the B→A block of `(P_A)'`. Cross blocks `P_B K P_A` do not
//! appear in `S^c`; the finite-difference oracle checks the form exactly on
//! models whose operator is block-diagonal in the split.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{propagate_span, TangentPair};
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{moving_split, CurvatureModel, HigherRankFamily, SplitSpec};

/// Boundary samples satisfy `|Q^c| <= BOUNDARY_TOL` after normalization.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Step used for the finite-difference `A'` of time-dependent models.
pub const SPLIT_DERIVATIVE_STEP: f64 = 1e-5;

/// Consecutive samples whose A-projections differ by more than this (Frobenius
/// norm) are treated as a discontinuity of `v ↦ A(v)`.
pub const PROJECTION_JUMP_TOL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QFormParams {
    c: f64,
}

impl QFormParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::param(format!("c must be positive, got {c}")));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeClass {
    Boundary,
    Positive,
    Negative,
}

impl ConeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConeClass::Boundary => "boundary",
            ConeClass::Positive => "positive",
            ConeClass::Negative => "negative",
        }
    }

    fn stream(&self) -> u64 {
        match self {
            ConeClass::Boundary => 0,
            ConeClass::Positive => 1,
            ConeClass::Negative => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSample {
    pub pair: TangentPair,
    /// The same vector in split coordinates `(η_A, ς_A, η_B, ς_B)`.
    pub coords: DVector<f64>,
    pub cone_class: ConeClass,
    pub qvalue: f64,
}

fn qform_coords(c: f64, r: usize, b: usize, w: &DVector<f64>) -> f64 {
    let eta_a = w.rows(0, r);
    let sig_a = w.rows(r, r);
    let eta_b = w.rows(2 * r, b);
    let sig_b = w.rows(2 * r + b, b);
    eta_a.dot(&sig_a) - c * c * eta_b.norm_squared() - sig_b.norm_squared()
}

/// The symmetric matrix of `Q^c` in split coordinates.
pub fn qform_matrix(params: &QFormParams, r: usize, b: usize) -> DMatrix<f64> {
    let c = params.c;
    let dim = 2 * (r + b);
    let mut q = DMatrix::zeros(dim, dim);
    for i in 0..r {
        q[(i, r + i)] = 0.5;
        q[(r + i, i)] = 0.5;
    }
    for i in 0..b {
        q[(2 * r + i, 2 * r + i)] = -c * c;
        q[(2 * r + b + i, 2 * r + b + i)] = -1.0;
    }
    q
}

/// `Q^c(η, ς) = g(η_A, ς_A) - c²|η_B|² - |ς_B|²`.
pub fn qform_eval(params: &QFormParams, split: &SplitSpec, pair: &TangentPair) -> Result<f64> {
    let w = split.split_coords(pair)?;
    Ok(qform_coords(params.c, split.r(), split.dim_b(), &w))
}

/// Assembles `S^c` in coordinates `(η_A, ς_A, η_B, ς_B)`.
pub fn assemble_s(
    params: &QFormParams,
    k_a: &DMatrix<f64>,
    k_b: &DMatrix<f64>,
    aprime: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (r, b) = (k_a.nrows(), k_b.nrows());
    if r > 0 {
        linalg::require_symmetric(k_a, "K_A")?;
    }
    if b > 0 {
        linalg::require_symmetric(k_b, "K_B")?;
    }
    if aprime.nrows() != r || aprime.ncols() != b {
        return Err(Error::contract(format!(
            "A' block must be {r}x{b}, got {}x{}",
            aprime.nrows(),
            aprime.ncols()
        )));
    }
    let c2 = params.c * params.c;
    let (ea, sa, eb, sb) = (0, r, 2 * r, 2 * r + b);
    let dim = 2 * (r + b);
    let mut s = DMatrix::zeros(dim, dim);
    s.view_mut((ea, ea), (r, r)).copy_from(&(-k_a));
    s.view_mut((sa, sa), (r, r)).fill_with_identity();
    let anti = k_b - DMatrix::identity(b, b) * c2;
    s.view_mut((eb, sb), (b, b)).copy_from(&anti);
    s.view_mut((sb, eb), (b, b)).copy_from(&anti.transpose());

    let mut put = |row: usize, col: usize, block: DMatrix<f64>| {
        s.view_mut((row, col), (r, b)).copy_from(&block);
        s.view_mut((col, row), (b, r)).copy_from(&block.transpose());
    };
    put(ea, eb, aprime * c2);
    put(ea, sb, aprime * 0.5);
    put(sa, eb, aprime * 0.5);
    put(sa, sb, aprime.clone());
    Ok(s)
}

/// `S^c` for operator `K` restricted to the split (`K_A = P_A K P_A`,
/// `K_B = P_B K P_B`), using the split's `A'`.
pub fn s_matrix_for(params: &QFormParams, split: &SplitSpec, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if k.nrows() != split.dim() {
        return Err(Error::contract("operator and split dimensions differ"));
    }
    let (ka, kb) = split.restrict(k);
    assemble_s(params, &ka, &kb, split.aprime())
}

/// `d/dt Q^c = g̃(S^c w, w)` at the pair `w`.
pub fn form_derivative(
    params: &QFormParams,
    split: &SplitSpec,
    k: &DMatrix<f64>,
    pair: &TangentPair,
) -> Result<f64> {
    let s = s_matrix_for(params, split, k)?;
    let w = split.split_coords(pair)?;
    Ok(w.dot(&(&s * &w)))
}

/// Central difference of `τ ↦ Q^c(φ_τ w)` at time `t`, with the split held
/// fixed (parallel). Independent of `S^c`: the flow is integrated with RK4.
pub fn fd_derivative_oracle(
    model: &CurvatureModel,
    split: &SplitSpec,
    params: &QFormParams,
    pair: &TangentPair,
    t: f64,
    h: f64,
    step: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::param("finite-difference step h must be positive"));
    }
    let forward = propagate_span(model, pair, t, t + h, step)?;
    let backward = propagate_span(model, pair, t, t - h, step)?;
    let qf = qform_eval(params, split, &forward)?;
    let qb = qform_eval(params, split, &backward)?;
    Ok((qf - qb) / (2.0 * h))
}

/// Draws cone samples in split coordinates: a unit Gaussian direction whose B
/// part is rescaled so the sample lands in the requested class, then
/// normalized to unit Sasaki norm.
pub(crate) fn sample_coords(
    params: &QFormParams,
    r: usize,
    b: usize,
    count: usize,
    seed: u64,
    class: ConeClass,
) -> Result<Vec<DVector<f64>>> {
    if count == 0 {
        return Err(Error::param("sample count must be at least 1"));
    }
    if r == 0 && class != ConeClass::Negative {
        return Err(Error::param(format!(
            "the {} cone is empty when dim A = 0",
            class.as_str()
        )));
    }
    let c2 = params.c * params.c;
    let dim = 2 * (r + b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class.stream());
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut w = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = w.norm();
        if norm < 1e-8 {
            continue;
        }
        w /= norm;
        let mut qa = w.rows(0, r).dot(&w.rows(r, r));
        // the degenerate negative cone needs g(η_A, ς_A) < 0, every other class > 0
        let want_negative_a = class == ConeClass::Negative && b == 0;
        if (want_negative_a && qa > 0.0) || (!want_negative_a && qa < 0.0) {
            let neg = -w.rows(r, r).into_owned();
            w.rows_mut(r, r).copy_from(&neg);
            qa = -qa;
        }
        let qb = c2 * w.rows(2 * r, b).norm_squared() + w.rows(2 * r + b, b).norm_squared();
        match class {
            ConeClass::Boundary => {
                if qa.abs() < 1e-10 {
                    continue;
                }
                if b == 0 {
                    let eta = w.rows(0, r).into_owned();
                    let sig = w.rows(r, r).into_owned();
                    let proj = &sig - &eta * (qa / eta.norm_squared());
                    w.rows_mut(r, r).copy_from(&proj);
                } else {
                    if qb < 1e-10 {
                        continue;
                    }
                    let scale = (qa / qb).sqrt();
                    let mut tail = w.rows_mut(2 * r, 2 * b);
                    tail *= scale;
                }
            }
            ConeClass::Positive => {
                if qa < 1e-10 {
                    continue;
                }
                if b > 0 && qa - qb <= 0.0 {
                    let u: f64 = rng.random_range(0.05..0.95);
                    let scale = u * (qa / qb).sqrt();
                    let mut tail = w.rows_mut(2 * r, 2 * b);
                    tail *= scale;
                }
            }
            ConeClass::Negative => {
                if b == 0 {
                    if qa.abs() < 1e-10 {
                        continue;
                    }
                } else if qa - qb >= 0.0 {
                    if qb < 1e-10 {
                        continue;
                    }
                    let u: f64 = rng.random_range(0.05..0.95);
                    let scale = (qa.max(0.0) / qb).sqrt() / u;
                    let mut tail = w.rows_mut(2 * r, 2 * b);
                    tail *= scale;
                }
            }
        }
        let norm = w.norm();
        w /= norm;
        let q = qform_coords(params.c, r, b, &w);
        let ok = match class {
            ConeClass::Boundary => q.abs() <= BOUNDARY_TOL,
            ConeClass::Positive => q > 0.0,
            ConeClass::Negative => q < 0.0,
        };
        if ok {
            out.push(w);
        }
    }
    Ok(out)
}

/// `count` deterministic samples of the requested cone class of `Q^c`.
pub fn cone_sample(
    params: &QFormParams,
    split: &SplitSpec,
    count: usize,
    seed: u64,
    class: ConeClass,
) -> Result<Vec<ConeSample>> {
    let coords = sample_coords(params, split.r(), split.dim_b(), count, seed, class)?;
    coords
        .into_iter()
        .map(|w| {
            let pair = split.pair_from_coords(&w)?;
            let qvalue = qform_coords(params.c, split.r(), split.dim_b(), &w);
            Ok(ConeSample { pair, coords: w, cone_class: class, qvalue })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// The sample attaining the smallest form value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgMin {
    pub t: f64,
    pub sample_id: usize,
    pub cone_class: ConeClass,
    pub eta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub form_value: f64,
}

/// One CSV row per sample: the time at which its form value was smallest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub sample_id: usize,
    pub t: f64,
    pub cone_class: ConeClass,
    pub q_value: f64,
    pub form_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub model: String,
    pub r: usize,
    pub c: f64,
    pub samples_used: usize,
    pub time_samples: usize,
    /// Minimum of `wᵀ S^c w` over unit boundary samples (and sampled times).
    pub min_form_boundary: f64,
    /// Minimum of `wᵀ S^c w` over unit positive-cone samples.
    pub min_form_positive: f64,
    /// `max_ν λ_min(S^c - ν Q^c)` at the worst sampled time: the exact minimum
    /// over the unit part of `C₀` (S-lemma), a sampling-free cross-check.
    pub dual_min_boundary: Option<f64>,
    /// Same with `ν >= 0`: the exact minimum over the closed positive cone.
    pub dual_min_closure: Option<f64>,
    /// `2α - c - β²/c` from the sampled spectra, when `A' = 0` and α, β exist.
    pub margin: Option<f64>,
    pub argmin: Option<ArgMin>,
    pub verdict: Verdict,
    pub reason: Option<String>,
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub count: usize,
    pub seed: u64,
    /// Number of times sampled over one period for time-dependent models.
    pub time_samples: usize,
}

impl CheckOptions {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { count, seed, time_samples: 64 }
    }
}

/// `2α - e - β²/e`: the lower bound on the form derivative per unit of
/// `g(η_A, ς_A)` when `A' = 0`.
pub fn corollary_margin(alpha: f64, beta: f64, e: f64) -> f64 {
    2.0 * alpha - e - beta * beta / e
}

struct SampleSet {
    boundary: Vec<DVector<f64>>,
    positive: Vec<DVector<f64>>,
}

impl SampleSet {
    fn draw(params: &QFormParams, r: usize, b: usize, count: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            boundary: sample_coords(params, r, b, count, seed, ConeClass::Boundary)?,
            positive: sample_coords(params, r, b, count, seed, ConeClass::Positive)?,
        })
    }

    fn iter(&self) -> impl Iterator<Item = (ConeClass, usize, &DVector<f64>)> {
        self.boundary
            .iter()
            .enumerate()
            .map(|(i, w)| (ConeClass::Boundary, i, w))
            .chain(self.positive.iter().enumerate().map(|(i, w)| (ConeClass::Positive, i, w)))
    }

    fn len(&self) -> usize {
        self.boundary.len() + self.positive.len()
    }
}

fn quad(s: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    w.dot(&(s * w))
}

fn dual_bracket(s: &DMatrix<f64>, c: f64) -> f64 {
    1e3 * (1.0 + s.amax()) * (1.0 + 1.0 / (c * c).min(1.0))
}

fn evaluate(
    model: &CurvatureModel,
    params: &QFormParams,
    times: &[f64],
    split_at: &dyn Fn(f64) -> Result<Option<SplitSpec>>,
    samples: &SampleSet,
    r: usize,
) -> Result<CriterionReport> {
    let n_samples = samples.len();
    let all: Vec<(ConeClass, usize, &DVector<f64>)> = samples.iter().collect();
    let mut best_per_sample = vec![(f64::INFINITY, 0.0_f64); n_samples];
    let mut worst_value = f64::INFINITY;
    let mut worst_s: Option<DMatrix<f64>> = None;

    for &t in times {
        let split = match split_at(t)? {
            Some(s) => s,
            None => {
                return Ok(CriterionReport {
                    model: model.name().to_string(),
                    r,
                    c: params.c,
                    samples_used: n_samples,
                    time_samples: times.len(),
                    min_form_boundary: f64::NAN,
                    min_form_positive: f64::NAN,
                    dual_min_boundary: None,
                    dual_min_closure: None,
                    margin: None,
                    argmin: None,
                    verdict: Verdict::Fail,
                    reason: Some(format!("no splitting: eigenvalue gap vanishes at t = {t}")),
                    rows: Vec::new(),
                });
            }
        };
        let s = s_matrix_for(params, &split, &model.operator(t))?;
        let values: Vec<f64> = all.par_iter().map(|(_, _, w)| quad(&s, w)).collect();
        for (slot, &v) in best_per_sample.iter_mut().zip(&values) {
            if v < slot.0 {
                *slot = (v, t);
            }
        }
        let local = values.iter().copied().fold(f64::INFINITY, f64::min);
        if local < worst_value {
            worst_value = local;
            worst_s = Some(s);
        }
    }

    let mut rows = Vec::with_capacity(n_samples);
    let mut min_b = f64::INFINITY;
    let mut min_p = f64::INFINITY;
    let mut arg: Option<(usize, f64, f64)> = None;
    let b = samples.boundary.first().map_or(0, |w| w.len() / 2 - r);
    for (idx, ((class, _, w), &(value, t))) in all.iter().zip(&best_per_sample).enumerate() {
        match class {
            ConeClass::Boundary => min_b = min_b.min(value),
            _ => min_p = min_p.min(value),
        }
        if arg.is_none_or(|(_, v, _)| value < v) {
            arg = Some((idx, value, t));
        }
        rows.push(SampleRow {
            sample_id: idx,
            t,
            cone_class: *class,
            q_value: qform_coords(params.c, r, b, w),
            form_value: value,
        });
    }

    let argmin = match arg {
        Some((idx, value, t)) => {
            let split = split_at(t)?.expect("split existed on the first pass");
            let pair = split.pair_from_coords(all[idx].2)?;
            Some(ArgMin {
                t,
                sample_id: idx,
                cone_class: all[idx].0,
                eta: pair.eta.iter().copied().collect(),
                sigma: pair.sigma.iter().copied().collect(),
                form_value: value,
            })
        }
        None => None,
    };

    let (dual_min_boundary, dual_min_closure) = match &worst_s {
        Some(s) => {
            let q = qform_matrix(params, r, b);
            let l = dual_bracket(s, params.c);
            (
                Some(linalg::lagrangian_dual_bound(s, &q, -l, l)?),
                Some(linalg::lagrangian_dual_bound(s, &q, 0.0, l)?),
            )
        }
        None => (None, None),
    };

    let verdict = if min_b > 0.0 && min_p > 0.0 { Verdict::Pass } else { Verdict::Fail };
    let reason = match verdict {
        Verdict::Pass => None,
        Verdict::Fail => Some("form derivative is not positive on every sampled cone vector".into()),
    };
    Ok(CriterionReport {
        model: model.name().to_string(),
        r,
        c: params.c,
        samples_used: n_samples,
        time_samples: times.len(),
        min_form_boundary: min_b,
        min_form_positive: min_p,
        dual_min_boundary,
        dual_min_closure,
        margin: None,
        argmin,
        verdict,
        reason,
        rows,
    })
}

/// Checks that `d/dt Q^c > 0` on sampled vectors of `C₀ ∪ C₊` along the model,
/// with `A` the span of the `r` most negative curvature directions.
pub fn criterion_check(
    model: &CurvatureModel,
    r: usize,
    params: &QFormParams,
    opts: &CheckOptions,
) -> Result<CriterionReport> {
    let d = model.frame_dim();
    if r < 1 || r >= d {
        return Err(Error::param(format!("r must satisfy 1 <= r <= {}, got {r}", d - 1)));
    }
    let times = model.sample_times(opts.time_samples);
    let samples = SampleSet::draw(params, r, d - r, opts.count, opts.seed)?;
    let split_at = |t: f64| -> Result<Option<SplitSpec>> {
        let es = moving_split(model, t, r, SPLIT_DERIVATIVE_STEP)?;
        Ok((!es.is_degenerate()).then_some(es.split))
    };
    let mut report = evaluate(model, params, &times, &split_at, &samples, r)?;
    if report.reason.as_deref().is_none_or(|s| !s.starts_with("no splitting")) {
        let ops: Vec<(f64, DMatrix<f64>)> = times.iter().map(|&t| (t, model.operator(t))).collect();
        let gap = gap_functions(&ops, r)?;
        let parallel = model.is_autonomous();
        if parallel && gap.undefined.is_empty() {
            report.margin = Some(corollary_margin(gap.alpha_inf, gap.beta_sup, params.c));
        }
    }
    Ok(report)
}

/// The negative-curvature check: the degenerate form `Q(η, ς) = g(η, ς)` with
/// `A = v^⊥` and its derivative `|ς|² - g(Kη, η)` on `C₀ ∪ C₊`.
pub fn negative_curvature_check(model: &CurvatureModel, count: usize, seed: u64) -> Result<CriterionReport> {
    let d = model.frame_dim();
    let params = QFormParams::new(1.0)?;
    let times = model.sample_times(64);
    let samples = SampleSet::draw(&params, d, 0, count, seed)?;
    let full = SplitSpec::full(d)?;
    let split_at = |_t: f64| -> Result<Option<SplitSpec>> { Ok(Some(full.clone())) };
    evaluate(model, &params, &times, &split_at, &samples, d)
}

/// Gap functions of the ordered spectra over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub r: usize,
    pub samples: usize,
    /// `inf α(v)`, `α(v) = sqrt(-λ_r(v))` (ascending order).
    pub alpha_inf: f64,
    /// `sup β(v)`, `β(v) = sqrt(-λ_{r+1}(v))`.
    pub beta_sup: f64,
    pub uniform_gap: bool,
    pub suggested_e: Option<f64>,
    /// Smallest pointwise gap `λ_{r+1} - λ_r` and where it occurs.
    pub min_gap: f64,
    pub argmin_gap: f64,
    /// Largest jump of `P_A` between consecutive samples.
    pub max_projection_jump: f64,
    pub split_continuous: bool,
    /// Sample parameters where α or β is undefined (a non-negative eigenvalue).
    pub undefined: Vec<f64>,
}

/// α, β, a uniform constant `e` and continuity of `A` over operators sampled
/// at parameters (`t` along an orbit or `s` along a direction path). Samples
/// are taken to be ordered along a path for the continuity check.
pub fn gap_functions(ops: &[(f64, DMatrix<f64>)], r: usize) -> Result<GapReport> {
    if ops.is_empty() {
        return Err(Error::param("gap functions need at least one sample"));
    }
    let mut alpha_inf = f64::INFINITY;
    let mut beta_sup = 0.0_f64;
    let mut min_gap = f64::INFINITY;
    let mut argmin_gap = ops[0].0;
    let mut undefined = Vec::new();
    let mut degenerate = false;
    let mut max_jump = 0.0_f64;
    let mut prev: Option<DMatrix<f64>> = None;
    for (param, k) in ops {
        let es = crate::models::eigen_split(k, r)?;
        let lam_r = es.eigenvalues[r - 1];
        let lam_next = es.eigenvalues[r];
        if es.gap < min_gap {
            min_gap = es.gap;
            argmin_gap = *param;
        }
        if es.is_degenerate() {
            degenerate = true;
        }
        if lam_r >= 0.0 || lam_next > 0.0 {
            undefined.push(*param);
        } else {
            alpha_inf = alpha_inf.min((-lam_r).sqrt());
            beta_sup = beta_sup.max((-lam_next).sqrt());
        }
        let p = es.split.projection_a();
        if let Some(q) = &prev {
            max_jump = max_jump.max(linalg::frobenius_distance(&p, q));
        }
        prev = Some(p);
    }
    let split_continuous = max_jump <= PROJECTION_JUMP_TOL;
    let uniform_gap = undefined.is_empty() && !degenerate && split_continuous && beta_sup < alpha_inf;
    let suggested_e = uniform_gap.then_some(0.5 * (alpha_inf + beta_sup));
    Ok(GapReport {
        r,
        samples: ops.len(),
        alpha_inf,
        beta_sup,
        uniform_gap,
        suggested_e,
        min_gap,
        argmin_gap,
        max_projection_jump: max_jump,
        split_continuous,
        undefined,
    })
}

/// [`gap_functions`] over the sample times of a model.
pub fn gap_functions_for_model(model: &CurvatureModel, r: usize, time_samples: usize) -> Result<GapReport> {
    let ops: Vec<_> = model
        .sample_times(time_samples)
        .into_iter()
        .map(|t| (t, model.operator(t)))
        .collect();
    gap_functions(&ops, r)
}

/// [`gap_functions`] along the direction path of a higher-rank family.
pub fn gap_functions_for_family(family: &HigherRankFamily, r: usize, spacing: f64) -> Result<GapReport> {
    let ops = family
        .path()
        .grid(spacing)
        .into_iter()
        .map(|s| Ok((s, family.at(s)?.operator(0.0))))
        .collect::<Result<Vec<_>>>()?;
    gap_functions(&ops, r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonReport {
    pub model: String,
    pub r: usize,
    pub c: f64,
    /// Largest `‖A'‖` for which the sampled form stays positive, worst case
    /// over the random directions.
    pub epsilon: f64,
    pub per_direction: Vec<f64>,
    pub base_min_form: f64,
    pub margin: Option<f64>,
}

/// Estimates the tolerance `ε` on `‖A'‖`: synthetic B→A blocks of unit
/// operator norm are injected into `S^c` and scaled until the sampled minimum
/// of the form over `C₀ ∪ C₊` reaches zero.
///
/// `S^c` is affine in `A'`, so for each sample the form is `a_w + s·b_w` and the
/// bisection limit is the closed-form `min_{b_w < 0} a_w / (-b_w)`.
pub fn corollary_epsilon(
    model: &CurvatureModel,
    r: usize,
    params: &QFormParams,
    opts: &CheckOptions,
    directions: usize,
) -> Result<EpsilonReport> {
    let base = criterion_check(model, r, params, opts)?;
    if base.verdict != Verdict::Pass {
        return Err(Error::Precondition(format!(
            "criterion fails with A' = 0 (min form {}), no tolerance exists",
            base.min_form_boundary.min(base.min_form_positive)
        )));
    }
    if directions == 0 {
        return Err(Error::param("need at least one A' direction"));
    }
    let d = model.frame_dim();
    let b = d - r;
    let samples = SampleSet::draw(params, r, b, opts.count, opts.seed)?;
    let all: Vec<&DVector<f64>> = samples.iter().map(|(_, _, w)| w).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(7);
    let blocks: Vec<DMatrix<f64>> = (0..directions)
        .map(|_| {
            let m = DMatrix::from_fn(r, b, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = linalg::spectral_norm(&m);
            m / norm
        })
        .collect();

    let zero_a = DMatrix::zeros(r, r);
    let zero_b = DMatrix::zeros(b, b);
    let s_free = assemble_s(params, &zero_a, &zero_b, &DMatrix::zeros(r, b))?;

    let mut per_direction = vec![f64::INFINITY; directions];
    for t in model.sample_times(opts.time_samples) {
        let es = moving_split(model, t, r, SPLIT_DERIVATIVE_STEP)?;
        let s0 = s_matrix_for(params, &es.split, &model.operator(t))?;
        let a_vals: Vec<f64> = all.par_iter().map(|w| quad(&s0, w)).collect();
        for (j, m) in blocks.iter().enumerate() {
            let s_dir = assemble_s(params, &zero_a, &zero_b, m)? - &s_free;
            let threshold = all
                .par_iter()
                .zip(a_vals.par_iter())
                .map(|(w, &a)| {
                    let slope = quad(&s_dir, w);
                    if slope < 0.0 { a / -slope } else { f64::INFINITY }
                })
                .reduce(|| f64::INFINITY, f64::min);
            per_direction[j] = per_direction[j].min(threshold);
        }
    }
    let epsilon = per_direction.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EpsilonReport {
        model: model.name().to_string(),
        r,
        c: params.c,
        epsilon,
        per_direction,
        base_min_form: base.min_form_boundary.min(base.min_form_positive),
        margin: base.margin,
    })
}
