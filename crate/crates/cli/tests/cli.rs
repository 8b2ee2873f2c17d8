use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn gaugeopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaugeopt")).args(args).output().expect("binary runs")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("gaugeopt-cli-{}-{name}", std::process::id()))
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

#[test]
fn feasibility_writes_trace_csv() {
    let csv = temp_path("feas.csv");
    let out = gaugeopt(&["feasibility", "--n", "20", "--iters", "30", "--method", "level", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    std::fs::remove_file(&csv).ok();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,time_s,objective,half_sq_objective,best_so_far,feasible"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 31);
    assert!(rows[0].starts_with("0,"));
    let summary = &stdout_json(&out)["summary"];
    assert_eq!(summary["status"], "completed");
    assert_eq!(summary["method"], "level");
    assert_eq!(summary["iterations"], 30);
}

#[test]
fn every_method_runs_on_feasibility() {
    for method in ["subgrad", "gengrad", "accel", "level"] {
        let out = gaugeopt(&["feasibility", "--n", "15", "--p1", "1.5", "--p2", "1.8", "--iters", "20", "--method", method, "--L", "50", "--mu", "0.1"]);
        assert_eq!(out.status.code(), Some(0), "{method}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn divergence_exits_with_two() {
    let out = gaugeopt(&["feasibility", "--n", "10", "--iters", "50", "--method", "subgrad", "--eta", "1e8"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["summary"]["status"], "diverged");
}

#[test]
fn accel_needs_finite_smoothness() {
    // The p = 1.5 ellipsoid is not smooth, so there is no certified L to default to.
    let out = gaugeopt(&["feasibility", "--n", "10", "--p1", "1.5", "--p2", "1.5", "--method", "accel"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--L"));
}

#[test]
fn trust_region_recovers_feasible_point() {
    let out = gaugeopt(&["trust-region", "--n", "12", "--m", "6", "--iters", "2000", "--L", "100", "--mu", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = &stdout_json(&out)["summary"];
    assert!(summary["primal_gauge"].as_f64().unwrap() <= 1.0 + 1e-8);
    assert!(summary["primal_objective"].as_f64().unwrap().is_finite());
}

#[test]
fn certify_reports_sampled_constants() {
    let out = gaugeopt(&["certify", "--set", r#"{"kind":"pnorm_ball","p":3,"offset":[0,0]}"#, "--samples", "20000"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["kind"], "pnorm_ball");
    let l = report["sampled"]["L_est"].as_f64().unwrap();
    assert!((l - 2.1424).abs() < 0.02, "{l}");
    assert_eq!(report["alpha"].as_f64(), Some(0.0));

    // A set given by path, with an unbounded smoothness constant.
    let path = temp_path("hull.json");
    std::fs::write(&path, r#"{"kind":"hull_ball_origin","c":[2,0],"rho":1}"#).unwrap();
    let out = gaugeopt(&["certify", "--set", path.to_str().unwrap(), "--center", "[1.5,0]", "--samples", "500"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_json(&out)["beta"].is_null());
}

#[test]
fn certify_rejects_bad_sets() {
    let out = gaugeopt(&["certify", "--set", r#"{"kind":"ball","c":[0,0],"r":-1}"#]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_prints_one_report_per_suite() {
    let out = gaugeopt(&["verify", "--count", "40", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: Vec<Value> = String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(reports.len() >= 10);
    assert!(reports.iter().any(|r| r["negative_control"] == true));
    assert!(reports.iter().all(|r| r["case_count"].as_u64().unwrap() > 0));
}
