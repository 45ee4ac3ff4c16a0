//! End-to-end tests of the `projfield` binary: exit codes, report shape,
//! determinism, and the sweep/CSV surface.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_projfield"))
}

fn run_config(dir: &Path, record: serde_json::Value, extra: &[&str]) -> Output {
    let config = dir.join("exp.json");
    std::fs::write(&config, serde_json::to_string_pretty(&record).unwrap()).unwrap();
    bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .args(extra)
        .output()
        .expect("binary must run")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout must be a JSON report")
}

#[test]
fn cochain_map_run_passes_with_zero_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        serde_json::json!({"experiment": "cochain-map", "d": 2, "i": 3, "j": 1}),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = stdout_json(&out);
    assert_eq!(report["pass"], true);
    assert_eq!(report["checks"][0]["residual"], 0.0);
}

#[test]
fn projective_run_passes_and_unrenormalized_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        serde_json::json!({"experiment": "projective", "d": 2, "i": 3, "j": 2}),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run_config(
        dir.path(),
        serde_json::json!({
            "experiment": "projective", "d": 2, "i": 3, "j": 2, "renormalized": false
        }),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(1),
        "the unrenormalized control must fail the check"
    );
    let report = stdout_json(&out);
    assert_eq!(report["pass"], false);
}

#[test]
fn covariance_consistency_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        serde_json::json!({
            "experiment": "covariance-consistency",
            "geometry": {"kind": "circle", "circumference": std::f64::consts::TAU},
            "coarse_n": 8, "fine_n": 16
        }),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = stdout_json(&out);
    assert!(report["checks"][0]["residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        serde_json::json!({"experiment": "cochain-map", "d": 1, "i": 2, "j": 1}),
        &["--d", "3", "--i", "3"],
    );
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["config"]["d"], 3);
    assert_eq!(report["config"]["i"], 3);
    assert_eq!(report["config"]["j"], 1);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // missing required field
    let out = run_config(
        dir.path(),
        serde_json::json!({"experiment": "cochain-map", "d": 2}),
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    // unknown experiment kind
    let out = run_config(
        dir.path(),
        serde_json::json!({"experiment": "frobnicate"}),
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    // invalid level ordering
    let out = run_config(
        dir.path(),
        serde_json::json!({"experiment": "cochain-map", "d": 1, "i": 2, "j": 2}),
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    // neither --config nor --experiment
    let out = bin().arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_is_required_for_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        serde_json::json!({
            "experiment": "mc-pushforward", "d": 1, "i": 2, "j": 1, "samples": 10000
        }),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "a missing seed must be a usage error"
    );
}

#[test]
fn level_cap_env_gives_resource_exit() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    std::fs::write(
        &config,
        serde_json::json!({"experiment": "cochain-map", "d": 1, "i": 3, "j": 1}).to_string(),
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .env("PROJFIELD_LEVEL_CAP", "2")
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn identical_config_and_seed_give_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let record = serde_json::json!({
        "experiment": "mc-pushforward", "d": 1, "i": 2, "j": 1,
        "samples": 20000, "seed": 99
    });
    let mut bodies = Vec::new();
    for _ in 0..2 {
        let out = run_config(dir.path(), record.clone(), &[]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let mut report = stdout_json(&out);
        report.as_object_mut().unwrap().remove("wall_time_ms");
        bodies.push(serde_json::to_string(&report).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn sweep_aggregates_and_writes_convergence_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    let csv = dir.path().join("table.csv");
    let output = dir.path().join("report.json");
    std::fs::write(
        &config,
        serde_json::to_string(&serde_json::json!([
            {"experiment": "cochain-map", "d": 1, "i": 3, "j": 1},
            {"experiment": "cochain-map", "d": 2, "i": 3, "j": 2},
            {
                "experiment": "convergence",
                "geometry": {"kind": "circle", "circumference": std::f64::consts::TAU},
                "mesh_sizes": [8, 16, 32],
                "quad_order": 6
            }
        ]))
        .unwrap(),
    )
    .unwrap();
    let out = bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .arg("--csv")
        .arg(&csv)
        .arg("--output")
        .arg(&output)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["experiments"].as_array().unwrap().len(), 3);

    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next(),
        Some("experiment,h,covariance_diag_error,interpolation_error")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    // monotone error columns
    for col in [2usize, 3] {
        for w in rows.windows(2) {
            assert!(
                w[1][col] < w[0][col],
                "column {col} must decrease: {rows:?}"
            );
        }
    }
}

#[test]
fn projective_sweep_over_dimensions_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    let mut records = Vec::new();
    for d in [1, 2] {
        for i in 2..=3u32 {
            for j in 1..i {
                records.push(serde_json::json!({
                    "experiment": "projective", "d": d, "i": i, "j": j
                }));
            }
        }
    }
    std::fs::write(
        &config,
        serde_json::to_string(&serde_json::json!(records)).unwrap(),
    )
    .unwrap();
    let out = bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["experiments"].as_array().unwrap().len(), 6);
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(&config, "[]").unwrap();
    let out = bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_failure_lists_failed_members() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(
        &config,
        serde_json::to_string(&serde_json::json!([
            {"experiment": "cochain-map", "d": 1, "i": 2, "j": 1},
            {"experiment": "projective", "d": 2, "i": 2, "j": 1, "renormalized": false}
        ]))
        .unwrap(),
    )
    .unwrap();
    let out = bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["failed"], serde_json::json!([1]));
}

#[test]
fn list_experiments_names_all_kinds() {
    let out = bin().arg("list-experiments").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for kind in [
        "cochain-map",
        "projective",
        "mc-pushforward",
        "whitney-isometry",
        "covariance-consistency",
        "convergence",
        "equicontinuity",
    ] {
        assert!(text.contains(kind), "missing {kind}");
    }
}

#[test]
fn whitney_isometry_line_windows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        serde_json::json!({
            "experiment": "whitney-isometry",
            "geometry": {
                "kind": "line",
                "coarse-window": [-1.0, 1.0],
                "fine-window": [-2.0, 2.0]
            },
            "coarse_n": 4, "fine_n": 16
        }),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn equicontinuity_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        serde_json::json!({
            "experiment": "equicontinuity", "d": 2, "i": 2, "pairs": 100, "seed": 5
        }),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
