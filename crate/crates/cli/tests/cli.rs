use std::path::Path;
use std::process::{Command, Output};

fn bwr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_model(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

const BINARY_RING: &str = r#"{
  "states": ["+1", "-1"],
  "agents": [
    {"likelihood": [[0.7, 0.4], [0.3, 0.6]]},
    {"likelihood": [[0.6, 0.3], [0.4, 0.7]]},
    {"likelihood": [[0.8, 0.5], [0.2, 0.5]]}
  ],
  "prior": [0.5, 0.5],
  "edges": [[0, 1], [1, 2], [2, 0], [1, 0]],
  "truth": "+1"
}"#;

const THREE_STATES: &str = r#"{
  "states": ["a", "b", "c"],
  "agents": [
    {"likelihood": [[0.5, 0.3, 0.2], [0.5, 0.7, 0.8]]},
    {"likelihood": [[0.4, 0.4, 0.1], [0.6, 0.6, 0.9]]}
  ],
  "prior": [0.4, 0.3, 0.3],
  "edges": [[0, 1], [1, 0]],
  "truth": "a"
}"#;

#[test]
fn analyze_graph_reports_perron_data() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", BINARY_RING);
    let out = bwr(&["analyze-graph", &model]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["strongly_connected"], true);
    let rho = v["spectral"]["rho"].as_f64().unwrap();
    // A has rows {2, 1}, {0}, {1}: characteristic polynomial λ³ − λ − 1
    assert!((rho - 1.324717957244746).abs() < 1e-9, "{rho}");

    let csv = bwr(&["analyze-graph", &model, "--format", "csv"]);
    assert!(stdout(&csv).starts_with("agent,in_degree,out_degree,alpha\n"));
    assert_eq!(stdout(&csv).lines().count(), 4);
}

#[test]
fn analyze_chain_json_and_kernel_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", BINARY_RING);
    let out = bwr(&["analyze-chain", &model]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["agents"], 3);
    let initial: f64 = v["initial_distribution"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((initial - 1.0).abs() < 1e-12);

    let csv = bwr(&["analyze-chain", &model, "--format", "csv"]);
    let text = stdout(&csv);
    assert_eq!(text.lines().count(), 9);
    for line in text.lines().skip(1) {
        let sum: f64 = line.split(',').skip(1).map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn chain_on_three_states_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", THREE_STATES);
    let out = bwr(&["analyze-chain", &model]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error [precondition]"));
}

#[test]
fn invalid_model_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = BINARY_RING.replace("[0.7, 0.4], [0.3, 0.6]", "[0.7, 0.4], [0.2, 0.6]");
    let model = write_model(dir.path(), "bad.json", &bad);
    let out = bwr(&["rates", &model]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid-input") && err.contains("agent 0"), "{err}");
}

#[test]
fn simulate_actions_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", BINARY_RING);
    let args = ["simulate-actions", &model, "--trials", "3", "--horizon", "20", "--seed", "7"];
    let a = bwr(&args);
    let b = bwr(&[&args[..], &["--sequential"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 1 + 3 * 21 * 3);

    let json = bwr(&[&args[..], &["--format", "json"]].concat());
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["actions"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_beliefs_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", THREE_STATES);
    let out_dir = dir.path().join("out");
    let out = bwr(&[
        "simulate-beliefs",
        &model,
        "--mode",
        "random-neighbor",
        "--trials",
        "2",
        "--horizon",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["beliefs.csv", "signals.csv", "choices.csv", "global_stats.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let stats = std::fs::read_to_string(out_dir.join("global_stats.csv")).unwrap();
    assert!(stats.starts_with("trial,t,false_state,Phi,Lambda\n"));
    assert_eq!(stats.lines().count(), 1 + 2 * 6 * 2);
}

#[test]
fn circle_mode_rejects_general_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", BINARY_RING);
    let out = bwr(&["simulate-beliefs", &model, "--mode", "circle"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("in-neighbor"));
}

#[test]
fn rates_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", THREE_STATES);
    let out = bwr(&["rates", &model, "--format", "csv"]);
    let text = stdout(&out);
    assert!(text.contains("centralized,,") && text.contains("random_walk,,"));
    assert_eq!(text.lines().filter(|l| l.starts_with("individual,")).count(), 2);
}

#[test]
fn run_scenario_file_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    write_model(dir.path(), "m.json", BINARY_RING);
    let scenario = r#"{"name": "ring", "model_file": "m.json", "dynamics": "actions",
                       "horizon": 50, "trials": 5, "seed": 11,
                       "outputs": ["trajectories", "chain-analysis", "rates"]}"#;
    let path = write_model(dir.path(), "s.json", scenario);
    let out_dir = dir.path().join("run");
    let out = bwr(&["run", &path, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["actions"]["outcomes"].as_array().unwrap().len(), 5);

    let again = bwr(&["summarize", out_dir.to_str().unwrap()]);
    assert_eq!(again.stdout, out.stdout);

    // overrides land in the manifest echo
    let out2 = dir.path().join("run2");
    bwr(&["run", &path, "--trials", "2", "--out", out2.to_str().unwrap()]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario"]["trials"], 2);
    assert_eq!(manifest["schema_version"], 1);
}

#[test]
fn run_builtin_and_unknown_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("t1");
    let out = bwr(&["run", "builtin:theorem1-demo", "--trials", "2", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out_dir.join("global_stats.csv").exists());
    let bad = bwr(&["run", "builtin:nope"]);
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn summarize_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("manifest.json"), "not json").unwrap();
    let out = bwr(&["summarize", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn example1_small() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ex");
    let out = bwr(&["example1", "--trials", "2", "--horizon", "600", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["beliefs"]["root_circle"]["agents"], serde_json::json!([0, 1, 2]));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["edges"].as_array().unwrap().len(), 8);
}

#[test]
fn usage_error_is_nonzero() {
    let out = bwr(&["frobnicate"]);
    assert!(!out.status.success());
}
