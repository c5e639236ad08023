//! End-to-end tests of the `hoskip` binary: output contracts, unit
//! conversions, exit codes, and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn hoskip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoskip"))
        .args(args)
        .env_remove("HOSKIP_THREADS")
        .env_remove("HOSKIP_SEED")
        .output()
        .expect("spawn hoskip")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn value_of(out: &Output, key: &str) -> f64 {
    stdout_json(out)[key].as_f64().unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn h0_reports_both_time_bases() {
    let out = hoskip(&["h0", "--lambda", "10", "--vbar", "0.01", "--speed-unit", "km_per_sec"]);
    let doc = stdout_json(&out);
    let per_slot = doc["value"].as_f64().unwrap();
    let per_sec = doc["value_per_sec"].as_f64().unwrap();
    // 0.01 km/sec at 1 ms slots is 1e-5 km/slot.
    let expect = 4.0 * 10f64.sqrt() * 1e-5 / std::f64::consts::PI;
    assert!((per_slot - expect).abs() <= 1e-15, "{per_slot} vs {expect}");
    assert!((per_sec - expect / 1e-3).abs() <= 1e-12, "{per_sec}");
    assert_eq!(doc["units"]["value"], "handovers/slot");
    assert_eq!(doc["units"]["value_per_sec"], "handovers/sec");
    assert!(doc["quadrature_err"].is_null());
}

#[test]
fn t0_is_density_invariant_without_noise() {
    let a = value_of(&hoskip(&["t0", "--lambda", "1", "--beta", "3"]), "value");
    let b = value_of(&hoskip(&["t0", "--lambda", "2", "--beta", "3"]), "value");
    assert_eq!(a, b, "noise-free rate must not depend on density");
}

#[test]
fn sopt_matches_frozen_value_and_is_linear_in_cost() {
    let out = hoskip(&["sopt", "--beta", "3", "--c", "10"]);
    let doc = stdout_json(&out);
    let s10 = doc["value"].as_f64().unwrap();
    assert!((s10 - 2.6113062576302375).abs() <= 1e-8 * s10, "{s10}");
    assert_eq!(doc["s_rounded"], 3);
    let s20 = value_of(&hoskip(&["sopt", "--beta", "3", "--c", "20"]), "value");
    assert!((s20 - 2.0 * s10).abs() <= 1e-12 * s20, "{s20} vs 2×{s10}");
}

#[test]
fn tau_without_displacement_fails_usage() {
    let out = hoskip(&["tau", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn periodic_metrics_require_a_period() {
    for cmd in ["t1", "h1"] {
        let out = hoskip(&[cmd, "--lambda", "1"]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        let err = String::from_utf8_lossy(&out.stderr).into_owned();
        assert!(err.contains("--s"), "{cmd}: {err}");
    }
}

#[test]
fn invalid_density_names_the_invariant() {
    let out = hoskip(&["t0", "--lambda", "-3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("density"), "{err}");
}

#[test]
fn starved_quadrature_exits_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, r#"{"quadrature": {"max_subdivisions": 1}}"#).unwrap();
    let out = hoskip(&["t0", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn oversized_trajectory_exits_with_the_geometry_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(
        &path,
        r#"{"sim": {"horizon": 100000, "max_half_span": 2.0, "replications": 2}}"#,
    )
    .unwrap();
    let out = hoskip(&["simulate", "--config", path.to_str().unwrap(), "--vbar", "0.01"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("half-span"), "{err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, r#"{"network": {"lamda": 1.0}}"#).unwrap();
    let out = hoskip(&["t0", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("lamda"), "{err}");
}

#[test]
fn dump_config_round_trips_byte_identically() {
    let first = hoskip(&["dump-config", "--lambda", "5", "--s", "100", "--c", "2.5"]);
    assert!(first.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = hoskip(&["dump-config", "--config", path.to_str().unwrap()]);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, r#"{"network": {"lambda": 5.0, "beta": 4.0}}"#).unwrap();
    let out = hoskip(&["dump-config", "--config", path.to_str().unwrap(), "--beta", "3.5"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["network"]["lambda"], 5.0);
    assert_eq!(doc["network"]["beta"], 3.5);
}

#[test]
fn simulate_repeats_byte_identically_and_matches_analytics() {
    let args = [
        "simulate", "--policy", "scenario0", "--lambda", "1", "--vbar", "2e-3",
        "--reps", "32", "--horizon", "300", "--seed", "7", "--no-timestamp",
    ];
    let first = hoskip(&args);
    let second = hoskip(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let doc = stdout_json(&first);
    assert!(doc.get("timestamp_unix_sec").is_none());
    for metric in ["rate", "handover", "utility"] {
        let z = doc["z_scores"][metric].as_f64().unwrap();
        assert!(z < 5.0, "{metric} z-score {z}");
    }
    assert_eq!(doc["estimates"]["rate"]["replications"], 32);
    assert_eq!(doc["params"]["sim"]["seed"], 7);
}

#[test]
fn simulate_writes_one_trace_per_replication() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let out = hoskip(&[
        "simulate", "--policy", "periodic", "--s", "25", "--lambda", "1",
        "--vbar", "2e-3", "--reps", "3", "--horizon", "100", "--seed", "3",
        "--no-timestamp", "--trace-dir", traces.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mut names: Vec<String> = std::fs::read_dir(&traces)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["rep_0000.csv", "rep_0001.csv", "rep_0002.csv"]);
    let body = std::fs::read_to_string(traces.join("rep_0001.csv")).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "slot,x_km,y_km,serving_index,sinr,rate_nats,ho_flag"
    );
    assert_eq!(lines.count(), 100, "one row per slot");
}

#[test]
fn sweep_emits_labeled_columns_with_lf_rows() {
    let out = hoskip(&[
        "sweep", "--axis", "s", "--range", "1000:4000:3@log", "--lambda", "1",
        "--beta", "3", "--vbar", "1e-5", "--tau-mode", "lower_bound",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\r'), "records must end in bare LF");
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4, "header plus three rows");
    assert_eq!(
        rows[0],
        "s_slots,t0_nats_per_slot,h0_per_slot,u0_nats_per_slot,\
         t1_nats_per_slot,h1_per_slot,u1_nats_per_slot,\
         t1_lower_nats_per_slot,u1_lower_nats_per_slot"
    );
    let t1_col: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(
        t1_col[0] > t1_col[1] && t1_col[1] > t1_col[2],
        "longer skipping periods must not raise the rate: {t1_col:?}"
    );
}

#[test]
fn sweep_writes_to_a_file_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = hoskip(&[
        "sweep", "--axis", "beta", "--range", "3:5:1", "--lambda", "1",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let body = std::fs::read_to_string(&path).unwrap();
    assert!(body.starts_with("beta,"), "{body}");
    assert!(body.lines().next().unwrap().contains("sopt_slots"));
    assert_eq!(body.lines().count(), 4);
}

#[test]
fn compare_reports_each_policy_on_a_shared_seed() {
    let out = hoskip(&[
        "compare", "--policies", "scenario0,periodic:50", "--lambda", "1",
        "--vbar", "2e-3", "--reps", "16", "--horizon", "200", "--seed", "11",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("policy,s_slots,"));
    assert!(rows[1].starts_with("scenario0,,"));
    assert!(rows[2].starts_with("periodic:50,50,"));
    for row in &rows[1..] {
        assert!(row.ends_with(",16,11"), "replications and seed echo: {row}");
    }
}

#[test]
fn compare_rejects_a_single_policy() {
    let out = hoskip(&["compare", "--policies", "scenario0", "--reps", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_falls_back_to_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_hoskip"))
        .args(["dump-config"])
        .env("HOSKIP_SEED", "99")
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["sim"]["seed"], 99);

    let bad = Command::new(env!("CARGO_BIN_EXE_hoskip"))
        .args(["dump-config"])
        .env("HOSKIP_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&bad.stderr).contains("HOSKIP_SEED"),
        "the env var must be named"
    );
}

#[test]
fn config_path_errors_mention_the_path() {
    let missing = Path::new("/nonexistent/config.json");
    let out = hoskip(&["t0", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("/nonexistent/config.json")
    );
}
