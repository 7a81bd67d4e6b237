use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use curvph::config::ExperimentConfig;
use curvph::criterion::{self, CheckOptions, QFormParams};
use curvph::dynamics::{self, TangentPair};
use curvph::estimator::{self, BadSetRule, ConeOptions, LyapunovOptions};
use curvph::models::{self, BumpSpec, RootDatum};
use curvph::runner;

fn to_py(err: curvph::Error) -> PyErr {
    match err {
        curvph::Error::Parameter(_) | curvph::Error::Contract(_) | curvph::Error::Parse { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Serializes a report and hands it to `json.loads`.
fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Jacobi operator `K(t)` along a geodesic in a parallel frame.
#[pyclass(name = "CurvatureModel", frozen)]
struct PyCurvatureModel {
    inner: models::CurvatureModel,
}

#[pymethods]
impl PyCurvatureModel {
    #[staticmethod]
    fn constant_curvature(a: f64, n: usize) -> PyResult<Self> {
        let inner = models::CurvatureModel::constant_curvature(a, n).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn rank_one_symmetric(a: f64, n: usize, r: usize) -> PyResult<Self> {
        let inner = models::CurvatureModel::rank_one_symmetric(a, n, r).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (roots, direction, multiplicities=None))]
    fn higher_rank(roots: Vec<Vec<f64>>, direction: Vec<f64>, multiplicities: Option<Vec<usize>>) -> PyResult<Self> {
        let mult = multiplicities.unwrap_or_else(|| vec![1; roots.len()]);
        if mult.len() != roots.len() {
            return Err(PyValueError::new_err("one multiplicity per root"));
        }
        let roots = roots
            .into_iter()
            .zip(mult)
            .map(|(c, m)| RootDatum::new(c, m))
            .collect::<curvph::Result<Vec<_>>>()
            .map_err(to_py)?;
        let inner = models::CurvatureModel::higher_rank(roots, direction).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (a, n, r, center, width, period, amplitude=None, on_gamma=false))]
    fn non_anosov(
        a: f64,
        n: usize,
        r: usize,
        center: f64,
        width: f64,
        period: f64,
        amplitude: Option<f64>,
        on_gamma: bool,
    ) -> PyResult<Self> {
        let bump = BumpSpec::new(center, width, amplitude.unwrap_or(a * a)).map_err(to_py)?;
        let inner = models::CurvatureModel::non_anosov(a, n, r, bump, period, on_gamma).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// A constant operator given as a list of rows.
    #[staticmethod]
    fn fixed(name: String, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("operator must be square"));
        }
        let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        let inner = models::CurvatureModel::fixed(name, m).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dim_n(&self) -> usize {
        self.inner.dim_n()
    }

    #[getter]
    fn period(&self) -> Option<f64> {
        self.inner.period()
    }

    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }

    fn operator(&self, t: f64) -> Vec<Vec<f64>> {
        matrix_rows(&self.inner.operator(t))
    }

    fn __repr__(&self) -> String {
        format!("CurvatureModel('{}', n={})", self.inner.name(), self.inner.dim_n())
    }
}

/// Eigenvalues ascending and the gap `λ_{r+1} - λ_r`.
#[pyfunction]
fn eigen_split(model: &PyCurvatureModel, t: f64, r: usize) -> PyResult<(Vec<f64>, f64)> {
    let es = models::eigen_split(&model.inner.operator(t), r).map_err(to_py)?;
    Ok((es.eigenvalues, es.gap))
}

/// Jacobi pair `(η, σ)` at `t_end` from `(eta, sigma)` at 0.
#[pyfunction]
#[pyo3(signature = (model, eta, sigma, t_end, step=dynamics::DEFAULT_STEP))]
fn propagate(
    model: &PyCurvatureModel,
    eta: Vec<f64>,
    sigma: Vec<f64>,
    t_end: f64,
    step: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if eta.len() != sigma.len() {
        return Err(PyValueError::new_err("eta and sigma must have the same length"));
    }
    let p = dynamics::propagate_rk4(&model.inner, &TangentPair::from_slices(&eta, &sigma), t_end, step)
        .map_err(to_py)?;
    Ok((p.eta.iter().copied().collect(), p.sigma.iter().copied().collect()))
}

#[pyfunction]
fn wronskian(eta1: Vec<f64>, sigma1: Vec<f64>, eta2: Vec<f64>, sigma2: Vec<f64>) -> PyResult<f64> {
    dynamics::wronskian(&TangentPair::from_slices(&eta1, &sigma1), &TangentPair::from_slices(&eta2, &sigma2))
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (model, r, c, count, seed, time_samples=64))]
fn criterion_check<'py>(
    py: Python<'py>,
    model: &PyCurvatureModel,
    r: usize,
    c: f64,
    count: usize,
    seed: u64,
    time_samples: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let params = QFormParams::new(c).map_err(to_py)?;
    let mut opts = CheckOptions::new(count, seed);
    opts.time_samples = time_samples;
    let rep = py
        .detach(|| criterion::criterion_check(&model.inner, r, &params, &opts))
        .map_err(to_py)?;
    to_dict(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (model, r, time_samples=64))]
fn gap_functions<'py>(
    py: Python<'py>,
    model: &PyCurvatureModel,
    r: usize,
    time_samples: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let rep = criterion::gap_functions_for_model(&model.inner, r, time_samples).map_err(to_py)?;
    to_dict(py, &rep)
}

#[pyfunction]
fn corollary_margin(alpha: f64, beta: f64, e: f64) -> f64 {
    criterion::corollary_margin(alpha, beta, e)
}

#[pyfunction]
#[pyo3(signature = (model, t_total, seed, step=dynamics::DEFAULT_STEP, reorth_period=0.5, transient=None))]
fn lyapunov_spectrum<'py>(
    py: Python<'py>,
    model: &PyCurvatureModel,
    t_total: f64,
    seed: u64,
    step: f64,
    reorth_period: f64,
    transient: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut opts = LyapunovOptions::new(t_total, seed);
    opts.step = step;
    opts.reorth_period = reorth_period;
    if let Some(t) = transient {
        opts.transient = t;
    }
    let rep = py.detach(|| estimator::lyapunov_spectrum(&model.inner, &opts)).map_err(to_py)?;
    to_dict(py, &rep)
}

/// `(dim E^s, dim E^c, dim E^u)` from ascending exponents.
#[pyfunction]
fn splitting_dims(exponents: Vec<f64>, gap_threshold: f64) -> PyResult<(usize, usize, usize)> {
    let rep = estimator::LyapunovReport {
        model: String::new(),
        exponents,
        t_used: f64::NAN,
        reorth_period: f64::NAN,
        transient: f64::NAN,
        residual: f64::NAN,
    };
    Ok(estimator::splitting_dims(&rep, gap_threshold).map_err(to_py)?.as_tuple())
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (model, r, c, t_total, count, seed, step=dynamics::DEFAULT_STEP))]
fn cone_invariance_test<'py>(
    py: Python<'py>,
    model: &PyCurvatureModel,
    r: usize,
    c: f64,
    t_total: f64,
    count: usize,
    seed: u64,
    step: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let params = QFormParams::new(c).map_err(to_py)?;
    let mut opts = ConeOptions::new(t_total, count, seed);
    opts.step = step;
    let rep = py
        .detach(|| estimator::cone_invariance_test(&model.inner, r, &params, &opts))
        .map_err(to_py)?;
    to_dict(py, &rep)
}

/// Fraction of sampled times where some curvature exceeds `-beta²`.
#[pyfunction]
fn time_in_bad_set(model: &PyCurvatureModel, beta: f64, t_total: f64, dt: f64) -> PyResult<f64> {
    let rep = estimator::time_in_bad_set(&model.inner, &BadSetRule::Pinching { beta }, t_total, dt).map_err(to_py)?;
    Ok(rep.fraction)
}

/// Runs a flat `key = value` configuration; returns `(exit_code, report_json, csv)`.
#[pyfunction]
fn run_config(py: Python<'_>, text: &str) -> PyResult<(i32, String, String)> {
    let cfg = ExperimentConfig::parse(text).map_err(to_py)?;
    let out = py.detach(|| runner::execute(&cfg)).map_err(to_py)?;
    Ok((out.exit_code, out.report_json, out.csv))
}

#[pymodule]
#[pyo3(name = "curvph")]
fn curvph_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCurvatureModel>()?;
    m.add_function(wrap_pyfunction!(eigen_split, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(wronskian, m)?)?;
    m.add_function(wrap_pyfunction!(criterion_check, m)?)?;
    m.add_function(wrap_pyfunction!(gap_functions, m)?)?;
    m.add_function(wrap_pyfunction!(corollary_margin, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(splitting_dims, m)?)?;
    m.add_function(wrap_pyfunction!(cone_invariance_test, m)?)?;
    m.add_function(wrap_pyfunction!(time_in_bad_set, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
