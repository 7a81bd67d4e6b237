use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use serde_json::Value;

use curvph::config::{BadSetRuleName, ExperimentConfig, ModelName, Task};
use curvph::runner::{self, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

const RANK_ONE: &str = "model = rank_one\na = 1\nn = 4\nr = 2\ntask = criterion\nc = 1.5\ncount = 10000\nseed = 7\n";

fn curvph(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_curvph")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn criterion_pass_and_fail_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), RANK_ONE);
    let out = tmp.path().join("pass");
    let run = curvph(&["criterion", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(EXIT_PASS), "{}", String::from_utf8_lossy(&run.stderr));
    let rep = report(&out);
    assert_eq!(rep["result"]["verdict"], "pass");
    let min = rep["result"]["min_form_boundary"].as_f64().unwrap();
    assert!(min > 0.5 && min < 0.56, "min_form_boundary {min}");
    assert_eq!(rep["config"]["time_samples"], 64);
    let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert!(csv.starts_with("sample_id,t,cone_class,q_value,form_value\n"));
    assert_eq!(csv.lines().count(), 20_001);

    let cfg = write_config(tmp.path(), &RANK_ONE.replace("c = 1.5", "c = 4.0"));
    let out = tmp.path().join("fail");
    let run = curvph(&["criterion", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(EXIT_FAIL));
    assert_eq!(report(&out)["result"]["verdict"], "fail");
}

#[test]
fn errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), RANK_ONE);
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let run = curvph(&["criterion", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(EXIT_ERROR));

    let cfg = write_config(tmp.path(), &RANK_ONE.replace("seed = 7\n", ""));
    let run = curvph(&["criterion", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&run.stderr).contains("'seed'"));

    let run = curvph(&["criterion", "--config", &cfg, "--seed", "3", "--out", tmp.path().join("ok").to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(EXIT_PASS));
}

#[test]
fn gap_report_on_rank_one() {
    let cfg = ExperimentConfig::parse("model = rank_one\na = 1\nn = 4\nr = 2\ntask = gap").unwrap();
    let out = runner::execute(&cfg).unwrap();
    assert_eq!(out.exit_code, EXIT_PASS);
    let rep: Value = serde_json::from_str(&out.report_json).unwrap();
    assert_eq!(rep["result"]["alpha_inf"], 2.0);
    assert_eq!(rep["result"]["beta_sup"], 1.0);
    assert_eq!(rep["result"]["suggested_e"], 1.5);
}

#[test]
fn csv_headers_per_task() {
    let cases = [
        ("model = rank_one\na = 1\nn = 4\nr = 2\ntask = lyapunov\nT = 10\nseed = 1", "index,exponent,residual"),
        ("model = rank_one\na = 1\nn = 4\nr = 2\ntask = badset\nT = 1\nbeta = 0.5", "t,min_form,in_bad_set"),
        ("model = rank_one\na = 1\nn = 4\nr = 2\ntask = cones\nc = 1.5\nT = 1\ncount = 10\nseed = 1", "sample_id,exit_time,final_q"),
        ("model = rank_one\na = 1\nn = 4\nr = 2\ntask = epsilon\nc = 1.5\ncount = 100\nseed = 1", "direction,epsilon"),
    ];
    for (text, header) in cases {
        let out = runner::execute(&ExperimentConfig::parse(text).unwrap()).unwrap();
        assert_eq!(out.csv.lines().next(), Some(header));
        for line in out.csv.lines().skip(1) {
            for field in line.split(',').filter(|f| f.contains('e')) {
                let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
                assert_eq!(mantissa.len(), 18, "{field}");
            }
        }
    }
}

#[test]
fn defaults_are_echoed() {
    let cfg = ExperimentConfig::parse("model = constant\na = 1\nn = 3\ntask = lyapunov\nT = 10\nseed = 2").unwrap();
    let rep: Value = serde_json::from_str(&runner::execute(&cfg).unwrap().report_json).unwrap();
    assert_eq!(rep["config"]["reorth_period"], 0.5);
    assert_eq!(rep["config"]["transient"], 2.5);
    assert_eq!(rep["config"]["gap_threshold"], 0.25);
    assert_eq!(rep["result"]["splitting"]["verdict"], "anosov_like");
}

#[test]
fn repeated_cli_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "model = non_anosov\na = 1\nn = 3\nr = 1\nbump.center = 5\nbump.width = 0.5\nperiod = 10\ntask = cones\nc = 1.5\nT = 10\ncount = 200\nseed = 4",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, workers) in [(&a, "1"), (&b, "8")] {
        let st = Command::new(env!("CARGO_BIN_EXE_curvph"))
            .env(runner::WORKERS_ENV, workers)
            .args(["cones", "--config", &cfg, "--out", dir.to_str().unwrap()])
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(EXIT_PASS));
    }
    for f in ["report.json", "samples.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop_oneof![Just(ModelName::RankOne), Just(ModelName::NonAnosov)],
        prop_oneof![Just(Task::Criterion), Just(Task::Lyapunov), Just(Task::Badset), Just(Task::Cones)],
        (2usize..8, 0.1..3.0f64, 0.1..5.0f64, any::<u64>(), 1usize..100_000),
        (0.0..10.0f64, 0.01..2.0f64, 10.0..50.0f64, any::<bool>(), proptest::option::of(0.001..0.1f64)),
        proptest::option::of(prop_oneof![Just(BadSetRuleName::Pinching), Just(BadSetRuleName::Criterion)]),
    )
        .prop_map(|(model, task, (n, a, c, seed, count), (center, width, period, on_gamma, dt), rule)| {
            let text = format!(
                "model = {}\ntask = {}\nn = {}\nr = 1\na = {a}\nc = {c}\nseed = {seed}\ncount = {count}\nT = {period}\nbeta = {}\nbump.center = {center}\nbump.width = {width}\nperiod = {period}\non_gamma = {on_gamma}\n",
                model.as_str(),
                task.as_str(),
                n + 1,
                a / 2.0,
            );
            let mut cfg = ExperimentConfig::parse(&text).unwrap();
            cfg.dt = dt;
            cfg.badset_rule = rule;
            cfg
        })
}

proptest! {
    #[test]
    fn config_round_trip(cfg in arb_config()) {
        let text = cfg.serialize();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
