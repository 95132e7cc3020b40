use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sdkl_core::{DensityAt, ParamDensity, QuadSpec};

fn sdkl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdkl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SDKL_OUT")
        .output()
        .unwrap()
}

fn run_config(json: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, json).unwrap();
    sdkl(&["run", cfg.to_str().unwrap()], &dir.join("out"))
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const SMALL: &str = r#"{
  "master_seed": 7,
  "checks": [
    { "check": "theorem1",
      "grids": [{ "prefix": "g", "model": { "family": "gaussian_location" },
                  "rule": { "id": "sd", "alpha": 0.1 },
                  "truth": { "family": "gaussian_location" },
                  "lambdas": [-1.0, 0.5, 2.0], "y": [1.0, -0.5], "theta_pred": [0.0] }] },
    { "check": "theorem2",
      "scenarios": [{ "id": "e", "truth": { "density": { "family": "gaussian_location" }, "theta": 1.0 },
                      "model": { "family": "gaussian_location" }, "theta_pred": 0.0,
                      "rule": { "id": "sd", "alpha": 1.0 } }] }
  ]
}"#;

#[test]
fn small_config_agrees_and_writes_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(SMALL, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/theorem1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# sdkl master_seed=7"));
    assert_eq!(
        lines.next(),
        Some("scenario_id,check_id,predicted_sign,stabilized_sign,boundary,agrees,last_delta,err_estimate,runtime_ms")
    );
    assert_eq!(lines.count(), 6);
    assert!(!csv.contains('\r'));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["checks_run"], 7);
    assert_eq!(s["disagreed"], 0);
    assert_eq!(s["failed"], 0);
}

#[test]
fn unknown_family_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        &SMALL.replace(
            "\"truth\": { \"family\": \"gaussian_location\" }",
            "\"truth\": { \"family\": \"cauchy\" }",
        ),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_config("{ \"checks\": [", dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn duplicate_ids_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let dup = SMALL.replace("\"prefix\": \"g\"", "\"prefix\": \"g\"}, { \"prefix\": \"g\", \"model\": { \"family\": \"gaussian_location\" }, \"rule\": { \"id\": \"sd\", \"alpha\": 0.1 }, \"truth\": { \"family\": \"gaussian_location\" }, \"lambdas\": [2.0], \"y\": [1.0], \"theta_pred\": [0.0]");
    let out = run_config(&dup, dir.path());
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn empty_check_list_exits_0_with_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(r#"{ "checks": [] }"#, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["checks_run"], 0);
    assert_eq!(s["agreed"], 0);
}

#[test]
fn scenario_failure_is_recorded_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace(
        "\"model\": { \"family\": \"gaussian_location\" }, \"theta_pred\": 0.0",
        "\"model\": { \"family\": \"gaussian_scale\" }, \"theta_pred\": -1.0",
    );
    let out = run_config(&bad, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["failed"], 1);
    assert_eq!(s["errors"][0]["scenario_id"], "e");
    assert_eq!(s["checks_run"], 7);
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, SMALL).unwrap();
    let read = |sub: &str, jobs: &str| {
        let out = dir.path().join(sub);
        assert!(sdkl(&["run", cfg.to_str().unwrap(), "--jobs", jobs], &out)
            .status
            .success());
        fs::read(out.join("theorem1.csv")).unwrap()
    };
    let one = read("a", "1");
    assert_eq!(one, read("b", "4"));
    assert_eq!(one, read("c", "4"));
}

#[test]
fn seed_override_lands_in_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("o");
    assert!(sdkl(&["run", cfg.to_str().unwrap(), "--seed", "99"], &out)
        .status
        .success());
    let csv = fs::read_to_string(out.join("theorem2.csv")).unwrap();
    assert!(csv.starts_with("# sdkl master_seed=99\n"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_sdkl"))
        .args(["figure1", "--alpha", "0.5"])
        .env("SDKL_OUT", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("figure1/panel_a.csv").exists());
}

fn read_table(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn figure_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdkl(
        &["figure1", "--alpha", "0.5", "--delta", "0.01", "--y", "1"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let a = read_table(&dir.path().join("figure1/panel_a.csv"));
    assert_eq!(a.len(), 501);
    assert!(a.iter().all(|r| r[1] == r[2]));

    // The window spans the truncation bounds of every density drawn.
    let tail = QuadSpec::default().tail_mass;
    let model = ParamDensity::gaussian_location(1.0).unwrap();
    let lo = DensityAt::new(model, -1.0)
        .unwrap()
        .truncation_bounds(tail)
        .unwrap()
        .lo;
    let hi = DensityAt::new(model, 1.5)
        .unwrap()
        .truncation_bounds(tail)
        .unwrap()
        .hi;
    let x0: f64 = a[0][0].parse().unwrap();
    let x1: f64 = a[500][0].parse().unwrap();
    assert_eq!((x0, x1), (lo, hi));

    let deltas = read_table(&dir.path().join("figure1/deltas.csv"));
    let b = deltas.iter().find(|r| r[0] == "b").unwrap();
    assert!(b[7].parse::<f64>().unwrap() > 0.0);
}
