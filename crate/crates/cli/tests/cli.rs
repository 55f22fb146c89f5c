//! End-to-end checks of the command-line surface: exit codes, CSV artifacts,
//! and determinism of file-driven runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tubeswarm"))
}

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tubeswarm-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn validate_tube_pass_and_fail_exit_codes() {
    let dir = tempdir("validate");
    // Build a tube via teach, then validate it.
    let tube_path = dir.join("tube.json");
    let out = bin()
        .args(["teach"])
        .arg(repo_path("scenarios/teach_corridor.json"))
        .arg("--out")
        .arg(&tube_path)
        .args(["--r-s", "0.4"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin().arg("validate-tube").arg(&tube_path).output().unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let out = bin()
        .arg("validate-tube")
        .arg(repo_path("tubes/improper_corner.json"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "improper tube must exit 3");
    assert!(String::from_utf8_lossy(&out.stderr).contains("intersect"));

    let out = bin()
        .arg("validate-tube")
        .arg(dir.join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "missing file is a config error");
}

#[test]
fn run_writes_deterministic_csv_artifacts() {
    let dir_a = tempdir("run-a");
    let dir_b = tempdir("run-b");
    for dir in [&dir_a, &dir_b] {
        let out = bin()
            .arg("run")
            .arg(repo_path("scenarios/lab_m6.json"))
            .arg("--out-dir")
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["trajectory.csv", "metrics.csv"] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} must be byte-identical across runs");
        assert!(!a.is_empty());
    }
    let header = std::fs::read_to_string(dir_a.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,robot_id,x,y,vx,vy,finished\n"));
    let mheader = std::fs::read_to_string(dir_a.join("metrics.csv")).unwrap();
    assert!(mheader.starts_with("t,min_pair_dist,min_boundary_dist,V,Vdot,finished_count\n"));
}

#[test]
fn run_rejects_bad_initial_conditions_with_config_exit() {
    let dir = tempdir("bad-init");
    // Two robots starting in conflict.
    let scenario = r#"{
        "name": "bad",
        "tube": {"kind": "waypoints", "waypoints": [[0,0],[10,0]],
                 "half_widths": {"constant": 2.0}, "resample_spacing": 0.1},
        "robots": [
            {"id": 1, "start": [1.0, 0.0], "r_s": 0.4, "r_a": 0.8, "v_m": 1.0},
            {"id": 2, "start": [1.5, 0.0], "r_s": 0.4, "r_a": 0.8, "v_m": 1.0}
        ],
        "controller": {"variant": "modified"},
        "dt": 0.01,
        "duration": 1.0
    }"#;
    let path = dir.join("bad.json");
    std::fs::write(&path, scenario).unwrap();
    let out = bin()
        .arg("run")
        .arg(&path)
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_safety_violation_exits_one_and_writes_partial_log() {
    let dir = tempdir("violation");
    // Avoidance gain cut to nothing: the fast robot runs down the slow one.
    let scenario = r#"{
        "name": "collision",
        "tube": {"kind": "waypoints", "waypoints": [[0,0],[20,0]],
                 "half_widths": {"constant": 2.0}, "resample_spacing": 0.1},
        "robots": [
            {"id": 1, "start": [1.0, 0.0], "r_s": 0.4, "r_a": 0.8, "v_m": 2.0},
            {"id": 2, "start": [2.2, 0.0], "r_s": 0.4, "r_a": 0.8, "v_m": 0.05}
        ],
        "controller": {"variant": "modified", "k2": 1e-12},
        "dt": 0.01,
        "duration": 10.0
    }"#;
    let path = dir.join("collision.json");
    std::fs::write(&path, scenario).unwrap();
    let out = bin()
        .arg("run")
        .arg(&path)
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("safety violated"));
    // Partial CSVs still written for post-mortem analysis.
    assert!(dir.join("trajectory.csv").exists());
    assert!(dir.join("metrics.csv").exists());
}

#[test]
fn run_variant_and_duration_overrides() {
    let dir = tempdir("override");
    let out = bin()
        .arg("run")
        .arg(repo_path("scenarios/lab_m6.json"))
        .args(["--duration", "0.5", "--variant", "modified"])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    // 0.5 s at dt 0.01 plus the initial row, times 6 robots, plus header.
    let lines = std::fs::read_to_string(dir.join("trajectory.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(lines, 1 + 51 * 6);

    let out = bin()
        .arg("run")
        .arg(repo_path("scenarios/lab_m6.json"))
        .args(["--variant", "nonsense"])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn bench_writes_csv_table() {
    let dir = tempdir("bench");
    let csv = dir.join("bench.csv");
    let out = bin()
        .args(["bench", "--sizes", "5", "--steps", "3", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("M,variant,mean_step_ns,p99_step_ns,infeasible_steps\n"));
    assert_eq!(table.lines().count(), 5, "header plus four variants");
}

#[test]
fn gradcheck_reports_pass() {
    let out = bin().args(["gradcheck", "--samples", "50"]).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max relative error"));
    assert!(stdout.contains("PASS"));
}

#[test]
fn teach_then_run_through_tube_file() {
    // The teach output must reload bit-exactly.
    let dir = tempdir("teach");
    let tube_path = dir.join("tube.json");
    let out = bin()
        .arg("teach")
        .arg(repo_path("scenarios/teach_corridor.json"))
        .arg("--out")
        .arg(&tube_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&tube_path).unwrap();
    let tube = tubeswarm::VirtualTube::from_json(&text).unwrap();
    assert_eq!(tube.to_json(), text);
    assert!(Path::new(&tube_path).exists());
}
