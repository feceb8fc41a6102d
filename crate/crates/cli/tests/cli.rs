//! End-to-end tests of the `treepin` binary against the shipped configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn treepin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treepin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

#[test]
fn capacity_on_golden_config_reports_argmin_and_rates() {
    let config = config_dir().join("fig3.json");
    let output = treepin(&["capacity", config.to_str().unwrap()]);
    let doc = stdout_json(&output);
    assert_eq!(doc["argmin_edge"], serde_json::json!([5, 6]));
    assert_eq!(doc["c_wsk"], serde_json::json!(0.25));
    assert_eq!(doc["c_pk"], serde_json::json!(0.25));
    assert_eq!(doc["rates"]["per_node"]["2"], serde_json::json!(1.4));
    assert_eq!(doc["rates"]["components"]["2->1"], serde_json::json!(0.8));
    assert_eq!(doc["rates"]["components"]["2->3"], serde_json::json!(0.6));
}

#[test]
fn capacity_reports_are_byte_identical_across_runs() {
    let config = config_dir().join("fig3.json");
    let first = treepin(&["capacity", config.to_str().unwrap()]);
    let second = treepin(&["capacity", config.to_str().unwrap()]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let sim_config = config_dir().join("path3.json");
    let first = treepin(&["simulate", sim_config.to_str().unwrap(), "--exact-secrecy"]);
    let second = treepin(&["simulate", sim_config.to_str().unwrap(), "--exact-secrecy"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn capacity_weight_example_three_node_path() {
    let dir = std::env::temp_dir().join("treepin-cli-test-path");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("path3_weights.json");
    std::fs::write(
        &path,
        r#"{
            "nodes": 3,
            "edges": [
                {"i": 1, "j": 2, "weight": 0.3},
                {"i": 2, "j": 3, "weight": 0.7}
            ],
            "target_set": [1, 2, 3]
        }"#,
    )
    .unwrap();
    let output = treepin(&["capacity", path.to_str().unwrap(), "--verify-lp"]);
    let doc = stdout_json(&output);
    assert_eq!(doc["c_wsk"], serde_json::json!(0.3));
    assert_eq!(doc["r_co_closed_form"], serde_json::json!(0.7));
    assert_eq!(doc["r_co_lp"], serde_json::json!(0.7));
    assert!(doc["lp_gap"].as_f64().unwrap() <= 1e-7);

    let bounds = treepin(&["bounds", path.to_str().unwrap(), "--n", "10"]);
    let doc = stdout_json(&bounds);
    assert_eq!(doc["partition_bound"], serde_json::json!(0.3));
    assert_eq!(doc["packing_bound"], serde_json::json!(0.3));
    assert_eq!(doc["sandwich_ok"], serde_json::json!(true));
}

#[test]
fn verify_lp_refuses_large_networks_with_exit_3() {
    let config = config_dir().join("fig3.json");
    let output = treepin(&["capacity", config.to_str().unwrap(), "--verify-lp"]);
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("refused"));
}

#[test]
fn bounds_refuses_oversized_partition_enumeration() {
    let config = config_dir().join("fig3.json");
    let output = treepin(&["bounds", config.to_str().unwrap(), "--n", "10"]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn bounds_marks_packing_unavailable_but_exits_zero() {
    let dir = std::env::temp_dir().join("treepin-cli-test-unavail");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("three_of_four.json");
    std::fs::write(
        &path,
        r#"{
            "nodes": 4,
            "edges": [
                {"i": 1, "j": 2, "weight": 0.4},
                {"i": 2, "j": 3, "weight": 0.5},
                {"i": 3, "j": 4, "weight": 0.6}
            ],
            "target_set": [1, 2, 3]
        }"#,
    )
    .unwrap();
    let output = treepin(&["bounds", path.to_str().unwrap(), "--n", "10"]);
    let doc = stdout_json(&output);
    assert_eq!(doc["packing_bound"], serde_json::Value::Null);
    assert!(doc["packing_note"]
        .as_str()
        .unwrap()
        .contains("unavailable"));
    assert_eq!(doc["sandwich_ok"], serde_json::json!(true));
}

#[test]
fn simulate_path3_matches_protocol_contract() {
    let config = config_dir().join("path3.json");
    let output = treepin(&["simulate", config.to_str().unwrap(), "--exact-secrecy"]);
    let doc = stdout_json(&output);
    assert_eq!(doc["all_keys_equal"], serde_json::json!(true));
    assert_eq!(doc["broadcast_count"], serde_json::json!(1));
    assert_eq!(doc["communication_bits"], serde_json::json!(1));
    assert_eq!(doc["lambda"], serde_json::json!(1));
    assert_eq!(doc["reliability_failure"], serde_json::json!(0.0));
    let secrecy = &doc["secrecy"];
    assert_eq!(secrecy["within_composition_bound"], serde_json::json!(true));
    assert_eq!(secrecy["seed_mode"], serde_json::json!("enumerated"));
    // Transcript is embedded for replay; its digest matches its bytes.
    assert!(doc["transcript"]["broadcasts"].is_object());
}

#[test]
fn simulate_weight_only_config_fails_with_exit_2() {
    let config = config_dir().join("fig3.json");
    let output = treepin(&["simulate", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("sources required"));
}

#[test]
fn sweep_emits_rate_csv() {
    let config = config_dir().join("m2.json");
    let output = treepin(&[
        "simulate",
        config.to_str().unwrap(),
        "--sweep-n",
        "10,100,1000",
    ]);
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines[0], "n,lambda,rate");
    assert_eq!(lines.len(), 4);
    // Rates approach capacity - delta = 0.2 from below as n grows.
    let rate_of = |line: &str| line.split(',').nth(2).unwrap().parse::<f64>().unwrap();
    assert!(rate_of(lines[3]) <= 0.2 + 1e-9);
    assert!(rate_of(lines[3]) >= 0.2 - 1e-3 - 1e-9);
}

#[test]
fn malformed_config_fails_with_exit_2_and_location() {
    let dir = std::env::temp_dir().join("treepin-cli-test-bad");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, "{\n  \"nodes\": 2,\n  \"edges\": [\n").unwrap();
    let output = treepin(&["capacity", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("config error"));

    let cycle = dir.join("cycle.json");
    std::fs::write(
        &cycle,
        r#"{"nodes": 2, "edges": [{"i": 1, "j": 2, "weight": 0.5},
            {"i": 2, "j": 1, "weight": 0.5}], "target_set": [1, 2]}"#,
    )
    .unwrap();
    let output = treepin(&["capacity", cycle.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("tree"));
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = std::env::temp_dir().join("treepin-cli-test-out");
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("report.json");
    let config = config_dir().join("m2.json");
    let output = treepin(&[
        "capacity",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["c_wsk"], serde_json::json!(0.25));
}

#[test]
fn state_cap_env_var_limits_exact_secrecy() {
    let config = config_dir().join("path3.json");
    let output = Command::new(env!("CARGO_BIN_EXE_treepin"))
        .args(["simulate", config.to_str().unwrap(), "--exact-secrecy"])
        .env("TREEPIN_STATE_CAP", "16")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("cap of 16"), "stderr: {stderr}");
}
