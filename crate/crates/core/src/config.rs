//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # rank-one criterion
//! model = rank_one
//! a = 1
//! n = 4
//! r = 2
//! task = criterion
//! c = 1.5
//! count = 10000
//! seed = 7
//! ```
//!
//! Recognized keys, in serialization order:
//!
//! | key | meaning |
//! |-----|---------|
//! | `model` | `constant`, `rank_one`, `higher_rank`, `non_anosov` |
//! | `task` | `criterion`, `gap`, `lyapunov`, `cones`, `badset`, `epsilon` |
//! | `n`, `r`, `a` | dimension, dim of `A`, curvature rate |
//! | `roots` | root covectors, `;`-separated rows of `,`-separated numbers |
//! | `multiplicities` | `,`-separated, default all 1 |
//! | `path.from`, `path.to`, `path.s` | direction path and position on it |
//! | `bump.center`, `bump.width`, `bump.amplitude`, `period`, `on_gamma` | non-Anosov scenario |
//! | `c`, `T`, `step`, `count`, `seed` | task parameters |
//! | `reorth_period`, `transient`, `gap_threshold` | Lyapunov parameters |
//! | `time_samples`, `spacing`, `directions` | sampling of `t`, of `s`, of `A'` |
//! | `badset.rule`, `beta`, `dt` | bad-set measurement (`pinching` or `criterion`) |
//! | `output` | output directory |

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::criterion::QFormParams;
use crate::error::{Error, Result};
use crate::models::{BumpSpec, CurvatureModel, DirectionPath, HigherRankFamily, RootDatum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Constant,
    RankOne,
    HigherRank,
    NonAnosov,
}

impl ModelName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelName::Constant => "constant",
            ModelName::RankOne => "rank_one",
            ModelName::HigherRank => "higher_rank",
            ModelName::NonAnosov => "non_anosov",
        }
    }
}

impl FromStr for ModelName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "constant" => ModelName::Constant,
            "rank_one" => ModelName::RankOne,
            "higher_rank" => ModelName::HigherRank,
            "non_anosov" => ModelName::NonAnosov,
            other => return Err(format!("unknown model '{other}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Criterion,
    Gap,
    Lyapunov,
    Cones,
    Badset,
    Epsilon,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Criterion => "criterion",
            Task::Gap => "gap",
            Task::Lyapunov => "lyapunov",
            Task::Cones => "cones",
            Task::Badset => "badset",
            Task::Epsilon => "epsilon",
        }
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "criterion" => Task::Criterion,
            "gap" => Task::Gap,
            "lyapunov" => Task::Lyapunov,
            "cones" => Task::Cones,
            "badset" => Task::Badset,
            "epsilon" => Task::Epsilon,
            other => return Err(format!("unknown task '{other}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BadSetRuleName {
    Pinching,
    Criterion,
}

impl BadSetRuleName {
    pub fn as_str(&self) -> &'static str {
        match self {
            BadSetRuleName::Pinching => "pinching",
            BadSetRuleName::Criterion => "criterion",
        }
    }
}

impl FromStr for BadSetRuleName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pinching" => Ok(BadSetRuleName::Pinching),
            "criterion" => Ok(BadSetRuleName::Criterion),
            other => Err(format!("unknown bad-set rule '{other}'")),
        }
    }
}

/// A parsed configuration. Absent keys stay `None`; defaults are resolved by
/// the runner and echoed in its report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub task: Task,
    pub n: Option<usize>,
    pub r: Option<usize>,
    pub a: Option<f64>,
    pub roots: Option<Vec<Vec<f64>>>,
    pub multiplicities: Option<Vec<usize>>,
    pub path_from: Option<Vec<f64>>,
    pub path_to: Option<Vec<f64>>,
    pub path_s: Option<f64>,
    pub bump_center: Option<f64>,
    pub bump_width: Option<f64>,
    pub bump_amplitude: Option<f64>,
    pub period: Option<f64>,
    pub on_gamma: Option<bool>,
    pub c: Option<f64>,
    #[serde(rename = "T")]
    pub t_total: Option<f64>,
    pub step: Option<f64>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub reorth_period: Option<f64>,
    pub transient: Option<f64>,
    pub gap_threshold: Option<f64>,
    pub time_samples: Option<usize>,
    pub spacing: Option<f64>,
    pub directions: Option<usize>,
    pub badset_rule: Option<BadSetRuleName>,
    pub beta: Option<f64>,
    pub dt: Option<f64>,
    pub output: Option<String>,
}

const KEYS: &[&str] = &[
    "model",
    "task",
    "n",
    "r",
    "a",
    "roots",
    "multiplicities",
    "path.from",
    "path.to",
    "path.s",
    "bump.center",
    "bump.width",
    "bump.amplitude",
    "period",
    "on_gamma",
    "c",
    "T",
    "step",
    "count",
    "seed",
    "reorth_period",
    "transient",
    "gap_threshold",
    "time_samples",
    "spacing",
    "directions",
    "badset.rule",
    "beta",
    "dt",
    "output",
];

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| perr(line, format!("malformed value for '{key}': '{v}'")))
}

fn num_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| num(line, key, x.trim())).collect()
}

fn positive(line: usize, key: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(perr(line, format!("{key} must be positive")))
    }
}

impl ExperimentConfig {
    fn empty(model: ModelName, task: Task) -> Self {
        Self {
            model,
            task,
            n: None,
            r: None,
            a: None,
            roots: None,
            multiplicities: None,
            path_from: None,
            path_to: None,
            path_s: None,
            bump_center: None,
            bump_width: None,
            bump_amplitude: None,
            period: None,
            on_gamma: None,
            c: None,
            t_total: None,
            step: None,
            count: None,
            seed: None,
            reorth_period: None,
            transient: None,
            gap_threshold: None,
            time_samples: None,
            spacing: None,
            directions: None,
            badset_rule: None,
            beta: None,
            dt: None,
            output: None,
        }
    }

    /// Parses and validates a configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::parse_unvalidated(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without checking that the task's mandatory keys are present, so
    /// command-line overrides can be applied before [`validate`](Self::validate).
    pub fn parse_unvalidated(text: &str) -> Result<Self> {
        let mut seen: Vec<(&str, usize, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| perr(line, format!("expected 'key = value', got '{content}'")))?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(perr(line, format!("unknown key '{key}'")));
            }
            if let Some((_, first, _)) = seen.iter().find(|(k, _, _)| *k == key) {
                return Err(perr(line, format!("duplicate key '{key}' (first on line {first})")));
            }
            seen.push((key, line, value));
        }
        let get = |key: &str| seen.iter().find(|(k, _, _)| *k == key).map(|(_, l, v)| (*l, *v));
        let (mline, model) = get("model").ok_or_else(|| perr(0, "missing mandatory key 'model'"))?;
        let model = model.parse::<ModelName>().map_err(|m| perr(mline, m))?;
        let (tline, task) = get("task").ok_or_else(|| perr(0, "missing mandatory key 'task'"))?;
        let task = task.parse::<Task>().map_err(|m| perr(tline, m))?;
        let mut cfg = Self::empty(model, task);

        for &(key, line, v) in &seen {
            match key {
                "model" | "task" => {}
                "n" => cfg.n = Some(num(line, key, v)?),
                "r" => cfg.r = Some(num(line, key, v)?),
                "a" => cfg.a = Some(positive(line, key, num(line, key, v)?)?),
                "roots" => {
                    cfg.roots = Some(
                        v.split(';')
                            .map(|row| num_list::<f64>(line, key, row))
                            .collect::<Result<_>>()?,
                    )
                }
                "multiplicities" => cfg.multiplicities = Some(num_list(line, key, v)?),
                "path.from" => cfg.path_from = Some(num_list(line, key, v)?),
                "path.to" => cfg.path_to = Some(num_list(line, key, v)?),
                "path.s" => cfg.path_s = Some(num(line, key, v)?),
                "bump.center" => cfg.bump_center = Some(num(line, key, v)?),
                "bump.width" => cfg.bump_width = Some(positive(line, key, num(line, key, v)?)?),
                "bump.amplitude" => cfg.bump_amplitude = Some(num(line, key, v)?),
                "period" => cfg.period = Some(positive(line, key, num(line, key, v)?)?),
                "on_gamma" => cfg.on_gamma = Some(num(line, key, v)?),
                "c" => cfg.c = Some(positive(line, key, num(line, key, v)?)?),
                "T" => cfg.t_total = Some(positive(line, key, num(line, key, v)?)?),
                "step" => cfg.step = Some(positive(line, key, num(line, key, v)?)?),
                "count" => cfg.count = Some(num(line, key, v)?),
                "seed" => cfg.seed = Some(num(line, key, v)?),
                "reorth_period" => cfg.reorth_period = Some(positive(line, key, num(line, key, v)?)?),
                "transient" => cfg.transient = Some(num(line, key, v)?),
                "gap_threshold" => cfg.gap_threshold = Some(positive(line, key, num(line, key, v)?)?),
                "time_samples" => cfg.time_samples = Some(num(line, key, v)?),
                "spacing" => cfg.spacing = Some(positive(line, key, num(line, key, v)?)?),
                "directions" => cfg.directions = Some(num(line, key, v)?),
                "badset.rule" => cfg.badset_rule = Some(v.parse().map_err(|m| perr(line, m))?),
                "beta" => cfg.beta = Some(positive(line, key, num(line, key, v)?)?),
                "dt" => cfg.dt = Some(positive(line, key, num(line, key, v)?)?),
                "output" => cfg.output = Some(v.to_string()),
                _ => unreachable!("key list and match arms disagree"),
            }
        }
        Ok(cfg)
    }

    fn require<T: Copy>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| perr(0, format!("missing mandatory key '{key}' for model {} / task {}", self.model.as_str(), self.task.as_str())))
    }

    /// Checks that every key needed by the model and the task is present.
    pub fn validate(&self) -> Result<()> {
        match self.model {
            ModelName::Constant => {
                self.require("a", self.a)?;
                self.require("n", self.n)?;
            }
            ModelName::RankOne => {
                self.require("a", self.a)?;
                self.require("n", self.n)?;
                self.require("r", self.r)?;
            }
            ModelName::HigherRank => {
                if self.roots.is_none() {
                    return Err(perr(0, "missing mandatory key 'roots' for model higher_rank"));
                }
                if self.path_from.is_none() {
                    return Err(perr(0, "missing mandatory key 'path.from' for model higher_rank"));
                }
            }
            ModelName::NonAnosov => {
                self.require("a", self.a)?;
                self.require("n", self.n)?;
                self.require("r", self.r)?;
                self.require("bump.center", self.bump_center)?;
                self.require("bump.width", self.bump_width)?;
                self.require("period", self.period)?;
            }
        }
        match self.task {
            Task::Criterion | Task::Epsilon => {
                self.require("c", self.c)?;
                self.require("count", self.count)?;
                self.require("seed", self.seed)?;
                if self.model != ModelName::Constant || self.task == Task::Epsilon {
                    self.require("r", self.r)?;
                }
            }
            Task::Gap => {
                self.require("r", self.r)?;
            }
            Task::Lyapunov => {
                self.require("T", self.t_total)?;
                self.require("seed", self.seed)?;
            }
            Task::Cones => {
                self.require("r", self.r)?;
                self.require("c", self.c)?;
                self.require("T", self.t_total)?;
                self.require("count", self.count)?;
                self.require("seed", self.seed)?;
            }
            Task::Badset => {
                self.require("T", self.t_total)?;
                match self.badset_rule.unwrap_or(BadSetRuleName::Pinching) {
                    BadSetRuleName::Pinching => {
                        self.require("beta", self.beta)?;
                    }
                    BadSetRuleName::Criterion => {
                        self.require("r", self.r)?;
                        self.require("c", self.c)?;
                        self.require("count", self.count)?;
                        self.require("seed", self.seed)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the configuration back in the flat format; `parse` inverts it.
    pub fn serialize(&self) -> String {
        fn list<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("model", self.model.as_str().into());
        put("task", self.task.as_str().into());
        macro_rules! opt {
            ($key:expr, $field:expr) => {
                if let Some(v) = &$field {
                    put($key, v.to_string());
                }
            };
        }
        opt!("n", self.n);
        opt!("r", self.r);
        opt!("a", self.a);
        if let Some(roots) = &self.roots {
            put("roots", roots.iter().map(|r| list(r)).collect::<Vec<_>>().join("; "));
        }
        if let Some(m) = &self.multiplicities {
            put("multiplicities", list(m));
        }
        if let Some(v) = &self.path_from {
            put("path.from", list(v));
        }
        if let Some(v) = &self.path_to {
            put("path.to", list(v));
        }
        opt!("path.s", self.path_s);
        opt!("bump.center", self.bump_center);
        opt!("bump.width", self.bump_width);
        opt!("bump.amplitude", self.bump_amplitude);
        opt!("period", self.period);
        opt!("on_gamma", self.on_gamma);
        opt!("c", self.c);
        opt!("T", self.t_total);
        opt!("step", self.step);
        opt!("count", self.count);
        opt!("seed", self.seed);
        opt!("reorth_period", self.reorth_period);
        opt!("transient", self.transient);
        opt!("gap_threshold", self.gap_threshold);
        opt!("time_samples", self.time_samples);
        opt!("spacing", self.spacing);
        opt!("directions", self.directions);
        if let Some(rule) = &self.badset_rule {
            put("badset.rule", rule.as_str().into());
        }
        opt!("beta", self.beta);
        opt!("dt", self.dt);
        opt!("output", self.output);
        out
    }

    pub fn qform_params(&self) -> Result<QFormParams> {
        QFormParams::new(self.require("c", self.c)?)
    }

    fn roots_data(&self) -> Result<Vec<RootDatum>> {
        let roots = self.roots.as_ref().ok_or_else(|| Error::param("missing roots"))?;
        let mult = match &self.multiplicities {
            Some(m) if m.len() != roots.len() => {
                return Err(Error::param(format!(
                    "{} multiplicities for {} roots",
                    m.len(),
                    roots.len()
                )))
            }
            Some(m) => m.clone(),
            None => vec![1; roots.len()],
        };
        roots
            .iter()
            .zip(mult)
            .map(|(c, m)| RootDatum::new(c.clone(), m))
            .collect()
    }

    /// The direction path of a higher-rank model; a single direction if `path.to` is absent.
    pub fn direction_path(&self) -> Result<DirectionPath> {
        let from = self.path_from.clone().ok_or_else(|| Error::param("missing path.from"))?;
        match &self.path_to {
            Some(to) => DirectionPath::arc(from, to.clone()),
            None => Ok(DirectionPath::Fixed(from)),
        }
    }

    /// The higher-rank family along `path.from → path.to`.
    pub fn family(&self) -> Result<HigherRankFamily> {
        let roots = self.roots_data()?;
        let rank = roots.first().map(|r| r.covector.len()).unwrap_or(0);
        HigherRankFamily::new(roots, rank, self.direction_path()?)
    }

    /// The curvature model; for a higher-rank family, the member at `path.s` (default 0).
    pub fn build_model(&self) -> Result<CurvatureModel> {
        let a = || self.require("a", self.a);
        let n = || self.require("n", self.n);
        let r = || self.require("r", self.r);
        match self.model {
            ModelName::Constant => CurvatureModel::constant_curvature(a()?, n()?),
            ModelName::RankOne => CurvatureModel::rank_one_symmetric(a()?, n()?, r()?),
            ModelName::HigherRank => self.family()?.at(self.path_s.unwrap_or(0.0)),
            ModelName::NonAnosov => {
                let a = a()?;
                let bump = BumpSpec::new(
                    self.require("bump.center", self.bump_center)?,
                    self.require("bump.width", self.bump_width)?,
                    self.bump_amplitude.unwrap_or(a * a),
                )?;
                CurvatureModel::non_anosov(
                    a,
                    n()?,
                    r()?,
                    bump,
                    self.require("period", self.period)?,
                    self.on_gamma.unwrap_or(false),
                )
            }
        }
    }
}
