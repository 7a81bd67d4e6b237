//! Executes an [`ExperimentConfig`] and writes `report.json` and `samples.csv`.
//!
//! CSV headers by task:
//!
//! | task | header |
//! |------|--------|
//! | criterion | `sample_id,t,cone_class,q_value,form_value` |
//! | gap | `param,lambda_r,lambda_next,gap` |
//! | lyapunov | `index,exponent,residual` |
//! | cones | `sample_id,exit_time,final_q` |
//! | badset | `t,min_form,in_bad_set` |
//! | epsilon | `direction,epsilon` |
//!
//! Floats are printed with 17 significant digits. Exit codes: 0 for a passing
//! verdict or a completed measurement, 1 for a failing verdict, 2 for errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{BadSetRuleName, ExperimentConfig, ModelName, Task};
use crate::criterion::{self, CheckOptions, Verdict};
use crate::dynamics::DEFAULT_STEP;
use crate::error::{Error, Result};
use crate::estimator::{self, BadSetRule, ConeOptions, LyapunovOptions};
use crate::models::{self, DEFAULT_PATH_SPACING};

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "CURVPH_WORKERS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// In-memory result of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub exit_code: i32,
    pub report_json: String,
    pub csv: String,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Numeric(format!("serialization failed: {e}")))
}

fn defaults_echo(cfg: &ExperimentConfig, applied: Vec<(&str, Value)>) -> Result<Value> {
    let mut map = match to_value(cfg)? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    map.retain(|_, v| !v.is_null());
    for (k, v) in applied {
        map.entry(k.to_string()).or_insert(v);
    }
    Ok(Value::Object(map))
}

/// Runs the task described by `cfg` without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut csv = String::new();
    let (exit_code, result, applied): (i32, Value, Vec<(&str, Value)>) = match cfg.task {
        Task::Criterion => {
            let model = cfg.build_model()?;
            let count = cfg.count.unwrap_or(0);
            let seed = cfg.seed.unwrap_or(0);
            let time_samples = cfg.time_samples.unwrap_or(64);
            let report = match (cfg.model, cfg.r) {
                (ModelName::Constant, None) => criterion::negative_curvature_check(&model, count, seed)?,
                (_, r) => {
                    let r = r.ok_or_else(|| Error::param("missing r"))?;
                    let mut opts = CheckOptions::new(count, seed);
                    opts.time_samples = time_samples;
                    criterion::criterion_check(&model, r, &cfg.qform_params()?, &opts)?
                }
            };
            csv.push_str("sample_id,t,cone_class,q_value,form_value\n");
            for row in &report.rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    row.sample_id,
                    fmt_f64(row.t),
                    row.cone_class.as_str(),
                    fmt_f64(row.q_value),
                    fmt_f64(row.form_value)
                );
            }
            let code = if report.verdict == Verdict::Pass { EXIT_PASS } else { EXIT_FAIL };
            (code, to_value(&report)?, vec![("time_samples", json!(time_samples))])
        }
        Task::Gap => {
            let r = cfg.r.ok_or_else(|| Error::param("missing r"))?;
            let (ops, applied) = if cfg.model == ModelName::HigherRank && cfg.path_to.is_some() {
                let spacing = cfg.spacing.unwrap_or(DEFAULT_PATH_SPACING);
                let family = cfg.family()?;
                let ops = family
                    .path()
                    .grid(spacing)
                    .into_iter()
                    .map(|s| Ok((s, family.at(s)?.operator(0.0))))
                    .collect::<Result<Vec<_>>>()?;
                (ops, vec![("spacing", json!(spacing))])
            } else {
                let time_samples = cfg.time_samples.unwrap_or(64);
                let model = cfg.build_model()?;
                let ops = model
                    .sample_times(time_samples)
                    .into_iter()
                    .map(|t| (t, model.operator(t)))
                    .collect();
                (ops, vec![("time_samples", json!(time_samples))])
            };
            let report = criterion::gap_functions(&ops, r)?;
            csv.push_str("param,lambda_r,lambda_next,gap\n");
            for (p, k) in &ops {
                let es = models::eigen_split(k, r)?;
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    fmt_f64(*p),
                    fmt_f64(es.eigenvalues[r - 1]),
                    fmt_f64(es.eigenvalues[r]),
                    fmt_f64(es.gap)
                );
            }
            (EXIT_PASS, to_value(&report)?, applied)
        }
        Task::Lyapunov => {
            let model = cfg.build_model()?;
            let t_total = cfg.t_total.unwrap_or(0.0);
            let mut opts = LyapunovOptions::new(t_total, cfg.seed.unwrap_or(0));
            opts.step = cfg.step.unwrap_or(DEFAULT_STEP);
            opts.reorth_period = cfg.reorth_period.unwrap_or(opts.reorth_period);
            opts.transient = cfg.transient.unwrap_or(opts.transient);
            let threshold = cfg.gap_threshold.unwrap_or_else(|| estimator::default_gap_threshold(&model));
            let report = estimator::lyapunov_spectrum(&model, &opts)?;
            let dims = estimator::splitting_dims(&report, threshold)?;
            csv.push_str("index,exponent,residual\n");
            for (i, x) in report.exponents.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{}", i, fmt_f64(*x), fmt_f64(report.residual));
            }
            let value = json!({
                "spectrum": to_value(&report)?,
                "splitting": to_value(&dims)?,
                "symmetry_defect": report.symmetry_defect(),
            });
            let applied = vec![
                ("step", json!(opts.step)),
                ("reorth_period", json!(opts.reorth_period)),
                ("transient", json!(opts.transient)),
                ("gap_threshold", json!(threshold)),
            ];
            (EXIT_PASS, value, applied)
        }
        Task::Cones => {
            let model = cfg.build_model()?;
            let r = cfg.r.ok_or_else(|| Error::param("missing r"))?;
            let mut opts = ConeOptions::new(
                cfg.t_total.unwrap_or(0.0),
                cfg.count.unwrap_or(0),
                cfg.seed.unwrap_or(0),
            );
            opts.step = cfg.step.unwrap_or(DEFAULT_STEP);
            let report = estimator::cone_invariance_test(&model, r, &cfg.qform_params()?, &opts)?;
            csv.push_str("sample_id,exit_time,final_q\n");
            for row in &report.rows {
                let _ = writeln!(csv, "{},{},{}", row.sample_id, csv_opt(row.exit_time), fmt_f64(row.final_q));
            }
            let code = if report.fraction_retained == 1.0 { EXIT_PASS } else { EXIT_FAIL };
            (code, to_value(&report)?, vec![("step", json!(opts.step))])
        }
        Task::Badset => {
            let model = cfg.build_model()?;
            let dt = cfg.dt.unwrap_or(0.01);
            let rule_name = cfg.badset_rule.unwrap_or(BadSetRuleName::Pinching);
            let rule = match rule_name {
                BadSetRuleName::Pinching => BadSetRule::Pinching {
                    beta: cfg.beta.ok_or_else(|| Error::param("missing beta"))?,
                },
                BadSetRuleName::Criterion => BadSetRule::Criterion {
                    r: cfg.r.ok_or_else(|| Error::param("missing r"))?,
                    params: cfg.qform_params()?,
                    count: cfg.count.unwrap_or(0),
                    seed: cfg.seed.unwrap_or(0),
                },
            };
            let report = estimator::time_in_bad_set(&model, &rule, cfg.t_total.unwrap_or(0.0), dt)?;
            csv.push_str("t,min_form,in_bad_set\n");
            for row in &report.rows {
                let _ = writeln!(csv, "{},{},{}", fmt_f64(row.t), fmt_f64(row.min_form), row.in_bad_set as u8);
            }
            let applied = vec![("dt", json!(dt)), ("badset_rule", json!(rule_name.as_str()))];
            (EXIT_PASS, to_value(&report)?, applied)
        }
        Task::Epsilon => {
            let model = cfg.build_model()?;
            let r = cfg.r.ok_or_else(|| Error::param("missing r"))?;
            let directions = cfg.directions.unwrap_or(16);
            let time_samples = cfg.time_samples.unwrap_or(64);
            let mut opts = CheckOptions::new(cfg.count.unwrap_or(0), cfg.seed.unwrap_or(0));
            opts.time_samples = time_samples;
            let report = criterion::corollary_epsilon(&model, r, &cfg.qform_params()?, &opts, directions)?;
            csv.push_str("direction,epsilon\n");
            for (i, e) in report.per_direction.iter().enumerate() {
                let _ = writeln!(csv, "{},{}", i, fmt_f64(*e));
            }
            let applied = vec![("directions", json!(directions)), ("time_samples", json!(time_samples))];
            (EXIT_PASS, to_value(&report)?, applied)
        }
    };
    let report = json!({
        "task": cfg.task.as_str(),
        "config": defaults_echo(cfg, applied)?,
        "exit_code": exit_code,
        "result": result,
    });
    let mut report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Numeric(format!("serialization failed: {e}")))?;
    report_json.push('\n');
    Ok(RunOutput { exit_code, report_json, csv })
}

/// Output directory: `--out` beats the `output` key, which beats `./out`.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Writes `report.json` and `samples.csv` into `dir`, creating it if needed.
pub fn write_outputs(output: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), &output.report_json)?;
    std::fs::write(dir.join("samples.csv"), &output.csv)?;
    Ok(())
}

/// Number of worker threads from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::param(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Runs `cfg` on a pool of `workers` threads (default: available parallelism).
pub fn execute_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    pool.install(|| execute(cfg))
}

/// Full run: execute, write files, map errors to exit code 2.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> i32 {
    let result = workers_from_env()
        .and_then(|w| execute_with_workers(cfg, w))
        .and_then(|o| write_outputs(&o, &output_dir(cfg, out)).map(|_| o.exit_code));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
