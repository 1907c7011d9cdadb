//! End-to-end tests of the `condlab` binary: artifact presence,
//! rerun idempotence, config-hash sidecars, and the control → simulate
//! round trip.

use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_condlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn spectrum_is_idempotent_and_hash_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"nu": {"rational": [2, 1]}, "q": {"sine_series": [1.0]}, "K": 3}"#,
    );
    let args = [
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ];
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(dir.path().join("spectrum.csv")).unwrap();
    assert!(run(&args).status.success());
    let second = std::fs::read(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(first, second, "rerun must reproduce byte-identical CSV");

    // Sidecar hash matches a recomputation from the config file.
    use sha2::Digest;
    let expected = format!("{:x}", sha2::Sha256::digest(std::fs::read(&cfg).unwrap()));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("spectrum.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["config_sha256"], serde_json::json!(expected));
    assert_eq!(meta["command"], serde_json::json!("spectrum"));
}

#[test]
fn minimal_time_synthetic_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"nu": {"rational": [2, 1]}, "q": {"synthetic": {"tau": 1.0}}, "K": 30}"#,
    );
    let out = run(&[
        "minimal-time",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("minimal_time.json")).unwrap())
            .unwrap();
    let est = summary["estimate_at_k"].as_f64().unwrap();
    assert!((est - 1.0).abs() <= 0.02, "estimate {est} not within 0.02 of 1.0");
}

#[test]
fn control_then_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "nu": {"real": "2.0000000000000004"},
            "q": {"sine_series": [1.0]},
            "K": 4,
            "T": 1.0,
            "method": "gram",
            "precision_bits": 512,
            "steps": 8192,
            "y0": {"first": [0.8, -0.5], "second": [-0.4, 0.3]}
        }"#,
    );
    let out_str = dir.path().to_str().unwrap();
    let out = run(&["control", "--config", cfg.to_str().unwrap(), "--out", out_str]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("control.csv").exists());

    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_str]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("simulate.json")).unwrap()).unwrap();
    let residual = summary["relative_residual"].as_f64().unwrap();
    assert!(residual <= 1e-2, "terminal residual {residual} too large for a synthesized control");

    // The trajectory CSV is plot-ready: header plus t/norm columns.
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,norm_Hm1,norm_L2"));
    assert!(traj.lines().count() > 100);
}

#[test]
fn invalid_config_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"nu": {"rational": [2, 1]}, "q": {"sine_series": [1.0]}, "K": 3, "bogus": 1}"#,
    );
    let out = run(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus") || err.contains("unknown field"), "stderr: {err}");
}
