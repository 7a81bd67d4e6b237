//! Measurements of what the criterion predicts: Lyapunov spectra, splitting
//! dimensions, finite-time cone invariance, and the time an orbit spends where
//! the pointwise check fails.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::criterion::{self, ConeClass, QFormParams};
use crate::dynamics::{step_count, Rk4, TangentPair};
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{moving_split, CurvatureModel, SplitSpec};

/// Columns are propagated in fixed-size chunks so results do not depend on the
/// number of worker threads.
const CHUNK: usize = 64;

/// Columns whose norm exceeds this are rescaled; cone membership is invariant
/// under positive scaling.
const RENORMALIZE_ABOVE: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    pub t_total: f64,
    pub step: f64,
    pub reorth_period: f64,
    /// Growth before this time is discarded while the frame aligns.
    pub transient: f64,
    pub seed: u64,
}

impl LyapunovOptions {
    pub fn new(t_total: f64, seed: u64) -> Self {
        Self {
            t_total,
            step: crate::dynamics::DEFAULT_STEP,
            reorth_period: 0.5,
            transient: 0.25 * t_total,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub model: String,
    /// Ascending, `2(n-1)` values.
    pub exponents: Vec<f64>,
    pub t_used: f64,
    pub reorth_period: f64,
    pub transient: f64,
    /// Max change of any exponent between 3/4 of the run and the end.
    pub residual: f64,
}

impl LyapunovReport {
    /// `max_i |χ_i + χ_{N+1-i}|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.exponents.len();
        (0..n)
            .map(|i| (self.exponents[i] + self.exponents[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }
}

fn random_orthonormal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.qr().q()
}

/// Lyapunov spectrum of the Jacobi cocycle by repeated QR re-orthonormalization
/// of a full frame.
pub fn lyapunov_spectrum(model: &CurvatureModel, opts: &LyapunovOptions) -> Result<LyapunovReport> {
    if !(opts.reorth_period > 0.0) {
        return Err(Error::param("re-orthonormalization period must be positive"));
    }
    if opts.t_total < 10.0 * opts.reorth_period {
        return Err(Error::param(format!(
            "total time {} must be at least 10 re-orthonormalization periods ({})",
            opts.t_total,
            10.0 * opts.reorth_period
        )));
    }
    if !(0.0..opts.t_total).contains(&opts.transient) {
        return Err(Error::param("transient must lie in [0, T)"));
    }
    let dim = 2 * model.frame_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut frame = random_orthonormal(dim, &mut rng);
    let rk4 = Rk4::new(model);

    let periods = (opts.t_total / opts.reorth_period).round() as usize;
    let period = opts.t_total / periods as f64;
    let mut sums = vec![0.0; dim];
    let mut accumulated = 0.0;
    let mut checkpoint: Option<Vec<f64>> = None;
    for i in 0..periods {
        let t0 = period * i as f64;
        let t1 = period * (i + 1) as f64;
        let y = rk4.propagate(&frame, t0, t1, opts.step).map_err(|e| match e {
            Error::Overflow { time } => Error::Numeric(format!(
                "overflow at t = {time} within one re-orthonormalization period; reduce the period"
            )),
            other => other,
        })?;
        let qr = y.qr();
        let (mut q, r) = qr.unpack();
        for j in 0..dim {
            let rjj = r[(j, j)];
            if rjj == 0.0 || !rjj.is_finite() {
                return Err(Error::Numeric(format!("singular frame at t = {t1}")));
            }
            if rjj < 0.0 {
                let neg = -q.column(j).into_owned();
                q.set_column(j, &neg);
            }
            if t0 >= opts.transient {
                sums[j] += rjj.abs().ln();
            }
        }
        if t0 >= opts.transient {
            accumulated += period;
        }
        frame = q;
        if checkpoint.is_none() && t1 >= 0.75 * opts.t_total && accumulated > 0.0 {
            checkpoint = Some(sorted_rates(&sums, accumulated));
        }
    }
    if accumulated == 0.0 {
        return Err(Error::param("transient leaves no accumulation time"));
    }
    let exponents = sorted_rates(&sums, accumulated);
    let residual = checkpoint
        .map(|c| c.iter().zip(&exponents).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN);
    Ok(LyapunovReport {
        model: model.name().to_string(),
        exponents,
        t_used: opts.t_total,
        reorth_period: period,
        transient: opts.transient,
        residual,
    })
}

fn sorted_rates(sums: &[f64], time: f64) -> Vec<f64> {
    let mut v: Vec<f64> = sums.iter().map(|s| s / time).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingVerdict {
    /// Three or more exponent clusters: `E^s ⊕ E^c ⊕ E^u` with non-trivial center.
    PartiallyHyperbolic,
    /// Two clusters: hyperbolic, empty center.
    AnosovLike,
    /// No gap exceeds the threshold.
    NoDominatedSplitting,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingDims {
    pub stable: usize,
    pub center: usize,
    pub unstable: usize,
    pub verdict: SplittingVerdict,
    pub cluster_sizes: Vec<usize>,
    pub gap_threshold: f64,
}

impl SplittingDims {
    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.stable, self.center, self.unstable)
    }
}

/// Groups sorted exponents into clusters separated by gaps larger than
/// `gap_threshold`; the extreme clusters are `E^s` and `E^u`.
pub fn splitting_dims(report: &LyapunovReport, gap_threshold: f64) -> Result<SplittingDims> {
    let ex = &report.exponents;
    if ex.is_empty() {
        return Err(Error::param("empty exponent list"));
    }
    if ex.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::contract("exponents must be sorted ascending"));
    }
    let mut sizes = vec![1usize];
    for w in ex.windows(2) {
        if w[1] - w[0] > gap_threshold {
            sizes.push(1);
        } else {
            *sizes.last_mut().unwrap() += 1;
        }
    }
    let (stable, center, unstable, verdict) = match sizes.len() {
        1 => (0, sizes[0], 0, SplittingVerdict::NoDominatedSplitting),
        2 => (sizes[0], 0, sizes[1], SplittingVerdict::AnosovLike),
        k => (
            sizes[0],
            sizes[1..k - 1].iter().sum(),
            sizes[k - 1],
            SplittingVerdict::PartiallyHyperbolic,
        ),
    };
    Ok(SplittingDims {
        stable,
        center,
        unstable,
        verdict,
        cluster_sizes: sizes,
        gap_threshold,
    })
}

/// Default clustering threshold: a quarter of the model's curvature rate.
pub fn default_gap_threshold(model: &CurvatureModel) -> f64 {
    0.25 * model.scale()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeOptions {
    pub t_total: f64,
    pub count: usize,
    pub seed: u64,
    pub step: f64,
    /// Cone membership is checked every this many RK4 steps.
    pub check_every: usize,
}

impl ConeOptions {
    pub fn new(t_total: f64, count: usize, seed: u64) -> Self {
        Self {
            t_total,
            count,
            seed,
            step: crate::dynamics::DEFAULT_STEP,
            check_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeInvarianceReport {
    pub model: String,
    pub samples: usize,
    /// Fraction of samples with `Q^c > 0` at every checked time in `[0, T]`.
    pub fraction_retained: f64,
    pub min_exit_time: Option<f64>,
    /// Median of `Q^c(φ_T w) / |φ_T w|²`.
    pub contraction_stat: f64,
    #[serde(skip)]
    pub rows: Vec<ConeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeRow {
    pub sample_id: usize,
    pub exit_time: Option<f64>,
    pub final_q: f64,
}

/// Matrix of `Q^c` acting on stacked `(η, ς)` states for a given split.
fn state_qform(params: &QFormParams, split: &SplitSpec) -> DMatrix<f64> {
    let d = split.dim();
    let (r, b) = (split.r(), split.dim_b());
    let mut to_coords = DMatrix::zeros(2 * d, 2 * d);
    let at = split.basis_a().transpose();
    let bt = split.basis_b().transpose();
    to_coords.view_mut((0, 0), (r, d)).copy_from(&at);
    to_coords.view_mut((r, d), (r, d)).copy_from(&at);
    to_coords.view_mut((2 * r, 0), (b, d)).copy_from(&bt);
    to_coords.view_mut((2 * r + b, d), (b, d)).copy_from(&bt);
    let q = criterion::qform_matrix(params, r, b);
    to_coords.transpose() * q * to_coords
}

/// Propagates positive-cone samples drawn at `t = 0` and reports how many stay
/// in the cone for the whole run.
pub fn cone_invariance_test(
    model: &CurvatureModel,
    r: usize,
    params: &QFormParams,
    opts: &ConeOptions,
) -> Result<ConeInvarianceReport> {
    let es = moving_split(model, 0.0, r, criterion::SPLIT_DERIVATIVE_STEP)?;
    let samples = criterion::cone_sample(params, &es.split, opts.count, opts.seed, ConeClass::Positive)?;
    let pairs: Vec<TangentPair> = samples.into_iter().map(|s| s.pair).collect();
    cone_invariance_from(model, r, params, opts, &pairs)
}

/// [`cone_invariance_test`] for explicit initial vectors.
pub fn cone_invariance_from(
    model: &CurvatureModel,
    r: usize,
    params: &QFormParams,
    opts: &ConeOptions,
    initial: &[TangentPair],
) -> Result<ConeInvarianceReport> {
    if initial.is_empty() {
        return Err(Error::param("need at least one initial vector"));
    }
    if opts.check_every == 0 {
        return Err(Error::param("check_every must be positive"));
    }
    let d = model.frame_dim();
    let n_steps = step_count(0.0, opts.t_total, opts.step)?;
    let h = if n_steps == 0 { 0.0 } else { opts.t_total / n_steps as f64 };
    let check_steps: Vec<usize> = (0..=n_steps)
        .filter(|i| i % opts.check_every == 0 || *i == n_steps)
        .collect();

    let q_at = |t: f64| -> Result<DMatrix<f64>> {
        let es = moving_split(model, t, r, criterion::SPLIT_DERIVATIVE_STEP)?;
        if es.is_degenerate() {
            return Err(Error::Precondition(format!("no splitting at t = {t}")));
        }
        Ok(state_qform(params, &es.split))
    };
    let q_mats: Vec<DMatrix<f64>> = if model.is_autonomous() {
        vec![q_at(0.0)?]
    } else {
        check_steps.iter().map(|&i| q_at(h * i as f64)).collect::<Result<_>>()?
    };
    let q_for = |k: usize| -> &DMatrix<f64> { if q_mats.len() == 1 { &q_mats[0] } else { &q_mats[k] } };

    let mut y0 = DMatrix::zeros(2 * d, initial.len());
    for (j, p) in initial.iter().enumerate() {
        if p.dim() != d {
            return Err(Error::contract("initial vector dimension mismatch"));
        }
        y0.set_column(j, &p.to_state());
    }
    let rk4 = Rk4::new(model);

    let chunks: Vec<(usize, DMatrix<f64>)> = (0..initial.len())
        .step_by(CHUNK)
        .map(|start| {
            let width = CHUNK.min(initial.len() - start);
            (start, y0.columns(start, width).into_owned())
        })
        .collect();

    let results: Vec<Vec<ConeRow>> = chunks
        .into_par_iter()
        .map(|(start, mut y)| -> Result<Vec<ConeRow>> {
            let m = y.ncols();
            let mut exit: Vec<Option<f64>> = vec![None; m];
            let mut next_check = 0usize;
            let record = |y: &DMatrix<f64>, k: usize, t: f64, exit: &mut Vec<Option<f64>>| {
                let q = q_for(k);
                for j in 0..m {
                    let col = y.column(j);
                    let v = col.dot(&(q * col));
                    if v <= 0.0 && exit[j].is_none() {
                        exit[j] = Some(t);
                    }
                }
            };
            for i in 0..n_steps {
                if check_steps[next_check] == i {
                    record(&y, next_check, h * i as f64, &mut exit);
                    next_check += 1;
                }
                y = rk4.step(h * i as f64, h, &y);
                for j in 0..m {
                    let norm = y.column(j).norm();
                    if !norm.is_finite() {
                        return Err(Error::Overflow { time: h * (i + 1) as f64 });
                    }
                    if norm > RENORMALIZE_ABOVE {
                        let mut col = y.column_mut(j);
                        col /= norm;
                    }
                }
            }
            record(&y, check_steps.len() - 1, opts.t_total, &mut exit);
            let q = q_for(check_steps.len() - 1);
            Ok((0..m)
                .map(|j| {
                    let col = y.column(j);
                    ConeRow {
                        sample_id: start + j,
                        exit_time: exit[j],
                        final_q: col.dot(&(q * col)) / col.norm_squared(),
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ConeRow> = results.into_iter().flatten().collect();

    let retained = rows.iter().filter(|r| r.exit_time.is_none()).count();
    let min_exit_time = rows
        .iter()
        .filter_map(|r| r.exit_time)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
    let mut finals: Vec<f64> = rows.iter().map(|r| r.final_q).collect();
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = finals.len() / 2;
    let contraction_stat = if finals.len() % 2 == 1 {
        finals[mid]
    } else {
        0.5 * (finals[mid - 1] + finals[mid])
    };
    Ok(ConeInvarianceReport {
        model: model.name().to_string(),
        samples: rows.len(),
        fraction_retained: retained as f64 / rows.len() as f64,
        min_exit_time,
        contraction_stat,
        rows,
    })
}

/// Pointwise test deciding whether a time belongs to the failure set.
#[derive(Debug, Clone, PartialEq)]
pub enum BadSetRule {
    /// The cone criterion: the minimum of `wᵀ S^c w` over a fixed set of unit
    /// boundary samples is `<= 0` (or the eigen-split degenerates).
    Criterion {
        r: usize,
        params: QFormParams,
        count: usize,
        seed: u64,
    },
    /// The negative-curvature inequality at rate `β`:
    /// `min_{|η|=1} (-g(K η, η) - β²) <= 0`, i.e. some curvature exceeds `-β²`.
    Pinching { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadSetRow {
    pub t: f64,
    pub min_form: f64,
    pub in_bad_set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadSetReport {
    pub model: String,
    pub rule: String,
    pub fraction: f64,
    pub samples: usize,
    #[serde(skip)]
    pub rows: Vec<BadSetRow>,
}

/// Fraction of the times `t = 0, dt, 2dt, … < T` at which the pointwise rule fails.
pub fn time_in_bad_set(model: &CurvatureModel, rule: &BadSetRule, t_total: f64, dt: f64) -> Result<BadSetReport> {
    if !(dt > 0.0) {
        return Err(Error::param("dt must be positive"));
    }
    if !(t_total > 0.0) {
        return Err(Error::param("T must be positive"));
    }
    let n = ((t_total / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let times: Vec<f64> = (0..n).map(|i| dt * i as f64).collect();

    let rows: Vec<BadSetRow> = match rule {
        BadSetRule::Criterion { r, params, count, seed } => {
            let d = model.frame_dim();
            if *r < 1 || *r >= d {
                return Err(Error::param(format!("r must satisfy 1 <= r <= {}", d - 1)));
            }
            let samples = criterion::sample_coords(params, *r, d - r, *count, *seed, ConeClass::Boundary)?;
            times
                .par_iter()
                .map(|&t| {
                    let es = moving_split(model, t, *r, criterion::SPLIT_DERIVATIVE_STEP)?;
                    if es.is_degenerate() {
                        return Ok(BadSetRow { t, min_form: f64::NAN, in_bad_set: true });
                    }
                    let s = criterion::s_matrix_for(params, &es.split, &model.operator(t))?;
                    let min_form = samples
                        .iter()
                        .map(|w| w.dot(&(&s * w)))
                        .fold(f64::INFINITY, f64::min);
                    Ok(BadSetRow { t, min_form, in_bad_set: min_form <= 0.0 })
                })
                .collect::<Result<Vec<_>>>()?
        }
        BadSetRule::Pinching { beta } => {
            if !(*beta > 0.0) {
                return Err(Error::param("beta must be positive"));
            }
            times
                .par_iter()
                .map(|&t| {
                    let k = model.operator(t);
                    let shifted = -(k + DMatrix::identity(model.frame_dim(), model.frame_dim()) * (beta * beta));
                    let min_form = linalg::min_eigenvalue(&shifted)?;
                    Ok(BadSetRow { t, min_form, in_bad_set: min_form <= 0.0 })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let bad = rows.iter().filter(|r| r.in_bad_set).count();
    Ok(BadSetReport {
        model: model.name().to_string(),
        rule: match rule {
            BadSetRule::Criterion { .. } => "criterion".into(),
            BadSetRule::Pinching { .. } => "pinching".into(),
        },
        fraction: bad as f64 / rows.len() as f64,
        samples: rows.len(),
        rows,
    })
}

/// Unit vector helper for building explicit initial conditions.
pub fn unit_pair(eta: &[f64], sigma: &[f64]) -> TangentPair {
    let p = TangentPair::new(DVector::from_column_slice(eta), DVector::from_column_slice(sigma));
    let n = p.norm();
    p.scaled(1.0 / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(ex: &[f64]) -> LyapunovReport {
        LyapunovReport {
            model: "test".into(),
            exponents: ex.to_vec(),
            t_used: 1.0,
            reorth_period: 0.5,
            transient: 0.0,
            residual: 0.0,
        }
    }

    #[test]
    fn clustering_examples() {
        let d = splitting_dims(&report(&[-2.0, -2.0, -1.0, 1.0, 2.0, 2.0]), 0.25).unwrap();
        assert_eq!(d.as_tuple(), (2, 2, 2));
        assert_eq!(d.verdict, SplittingVerdict::PartiallyHyperbolic);
        let d = splitting_dims(&report(&[-1.0, -1.0, 1.0, 1.0]), 0.5).unwrap();
        assert_eq!(d.as_tuple(), (2, 0, 2));
        assert_eq!(d.verdict, SplittingVerdict::AnosovLike);
        let d = splitting_dims(&report(&[-2.0, -0.01, 0.01, 2.0]), 0.25).unwrap();
        assert_eq!(d.as_tuple(), (1, 2, 1));
        let d = splitting_dims(&report(&[-0.01, 0.0, 0.01]), 0.25).unwrap();
        assert_eq!(d.verdict, SplittingVerdict::NoDominatedSplitting);
    }

    #[test]
    fn unsorted_exponents_are_rejected() {
        assert!(splitting_dims(&report(&[1.0, -1.0]), 0.25).is_err());
    }

    #[test]
    fn lyapunov_requires_enough_periods() {
        let m = CurvatureModel::constant_curvature(1.0, 3).unwrap();
        let mut o = LyapunovOptions::new(4.0, 1);
        o.reorth_period = 0.5;
        assert!(matches!(lyapunov_spectrum(&m, &o), Err(Error::Parameter(_))));
    }

    #[test]
    fn pinching_rule_on_rank_one_is_empty() {
        let m = CurvatureModel::rank_one_symmetric(1.0, 4, 2).unwrap();
        let rep = time_in_bad_set(&m, &BadSetRule::Pinching { beta: 0.5 }, 5.0, 0.1).unwrap();
        assert_eq!(rep.fraction, 0.0);
        assert_eq!(rep.samples, 50);
    }
}
