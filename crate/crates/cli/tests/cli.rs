use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use trendtube::io::TestReportFile;

const CANDIDATES: &str = r#"[
  {"family": "linear"},
  {"family": "emax", "gamma": [0.001, 1.5]},
  {"family": "exponential", "gamma": [0.1, 2]}
]"#;

const FAST: &[&str] = &["--kappa", "4000", "--se-target", "0", "--tolerance", "0.002"];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trendtube"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn data_csv(f: impl Fn(f64, usize) -> f64) -> String {
    let mut s = String::from("dose,response\n");
    for d in [0.0, 0.05, 0.2, 0.6, 1.0] {
        for i in 0..4 {
            s.push_str(&format!("{d},{}\n", f(d, i)));
        }
    }
    s
}

fn run_test(dir: &Path, data: &str, extra: &[&str]) -> Output {
    let data = write(dir, "data.csv", data);
    let cand = write(dir, "cand.json", CANDIDATES);
    bin()
        .args(["test", "--data", data.to_str().unwrap(), "--candidates", cand.to_str().unwrap()])
        .args(FAST)
        .args(extra)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn noiseless_emax_is_detected_and_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_test(dir.path(), &data_csv(|d, _| 1.0 + 2.0 * d / (d + 0.2)), &[]);
    let v = json(&out);
    let emax = &v["report"]["models"][1];
    assert!(emax["p_adjusted"].as_f64().unwrap() < 1e-3);
    assert!((emax["gamma_hat"][0].as_f64().unwrap() - 0.2).abs() < 1e-4);
    assert_eq!(v["report"]["best"], 1);
    assert_eq!(v["report"]["reject"], true);
}

#[test]
fn constant_response_gives_unit_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&run_test(dir.path(), &data_csv(|_, _| 3.5), &[]));
    assert_eq!(v["report"]["lr_statistic"].as_f64(), Some(1.0));
    assert_eq!(v["report"]["p"].as_f64(), Some(1.0));
    assert_eq!(v["report"]["reject"], false);
}

#[test]
fn malformed_dose_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_test(dir.path(), "dose,response\n0,1.0\n0.5,2\nabc,3\n1,4\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn bad_candidate_domain_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cand = write(dir.path(), "c.json", r#"[{"family": "emax", "gamma": [-1, 2]}]"#);
    let out = bin()
        .args(["critical-value", "--candidates", cand.to_str().unwrap(), "--doses", "0,1,2", "--per-dose", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn degenerate_shape_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cand = write(dir.path(), "c.json", r#"[{"family": "emax", "gamma": {"fixed": 1e-300}}]"#);
    let out = bin()
        .args(["critical-value", "--candidates", cand.to_str().unwrap(), "--doses", "1,2,3", "--per-dose", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_effect_power_is_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let cand = write(dir.path(), "cand.json", CANDIDATES);
    let out = bin()
        .args(["power", "--candidates", cand.to_str().unwrap(), "--doses", "0,0.05,0.2,0.6,1", "--per-dose", "20"])
        .args(["--family", "emax", "--gamma", "0.2", "--delta", "0"])
        .args(["--kappa", "20000", "--se-target", "0"])
        .output()
        .unwrap();
    let v = json(&out);
    let p = v["power"].as_f64().unwrap();
    let se = v["mc_se"].as_f64().unwrap();
    assert!((p - 0.05).abs() < 0.003 + 4.0 * se, "power {p} se {se}");
}

#[test]
fn output_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_csv(|d, i| d + [0.3, -0.2, 0.1, -0.4][i]);
    let a = run_test(dir.path(), &data, &["--threads", "1", "--seed", "9"]);
    let b = run_test(dir.path(), &data, &["--threads", "3", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let data = data_csv(|d, i| d * d + [0.3, -0.2, 0.1, -0.4][i]);
    let out = run_test(dir.path(), &data, &["--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&out_path).unwrap();
    let parsed: TestReportFile = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.inputs.data.len(), 20);
    assert_eq!(parsed.report.models.len(), 3);
    assert_eq!(parsed.inputs.config.kappa, 4000);
    let again = serde_json::to_string_pretty(&parsed).unwrap();
    let a: Value = serde_json::from_str(&text).unwrap();
    let b: Value = serde_json::from_str(&again).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", r#"{"seed": 4, "kappa": 3000, "alpha": 0.1, "tolerance": 0.002,
        "max_kappa": 3000, "se_target": 0, "max_anchors": 0, "threads": 1}"#);
    let data = data_csv(|d, i| d + [0.3, -0.2, 0.1, -0.4][i]);
    let out = run_test(dir.path(), &data, &["--config", cfg.to_str().unwrap(), "--seed", "5"]);
    let v = json(&out);
    assert_eq!(v["inputs"]["config"]["seed"], 5);
    assert_eq!(v["report"]["critical"]["alpha"].as_f64(), Some(0.1));
}

#[test]
fn curves_are_standardized() {
    let dir = tempfile::tempdir().unwrap();
    let cand = write(dir.path(), "cand.json", CANDIDATES);
    let out = bin()
        .args(["curves", "--candidates", cand.to_str().unwrap(), "--doses", "0,0.05,0.2,0.6,1", "--per-dose", "2"])
        .args(["--per-model", "3", "--grid", "11"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("curve,dose,value"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 7 * 11);
    for r in &rows {
        let v: f64 = r[2].parse().unwrap();
        assert!((-1e-9..=1.0 + 1e-9).contains(&v));
    }
}
