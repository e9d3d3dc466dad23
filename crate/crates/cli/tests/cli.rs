use std::path::Path;
use std::process::{Command, Output};

fn valvetime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_valvetime"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

// mainline k = (1, 3) carrying flows (2, 1) in unit time under quadratic losses
const TWO_TAP: &str = r#"{
  "exponent": 2,
  "source": {"id": "src", "head": 7},
  "sink_head": 0,
  "edges": [
    {"from": "src", "to": "t1", "k": 1.0},
    {"from": "t1", "to": "s1", "k": 0.0},
    {"from": "t1", "to": "s2", "k": 3.0}
  ],
  "demands": {"s1": 1, "s2": 1}
}"#;

#[test]
fn two_tap_ratio() {
    let inst = valvetime(&["worst-case", "--m", "2", "--n", "2", "--format", "json"]);
    let doc = json(&inst);
    let r = doc["predicted_R"].as_f64().unwrap();
    assert!((r - 1.4071778).abs() < 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "wc.json", &stdout(&inst));
    let report = json(&valvetime(&["ratio", "--input", &path, "--format", "json"]));
    assert!((report["R"].as_f64().unwrap() - r).abs() < 1e-9);
    assert!((report["bound"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn worst_case_text_and_file_output() {
    let o = valvetime(&["worst-case", "--m", "2", "--n", "2", "--rho", "1e4"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("predicted_R 1.40717784901"), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wc.json");
    let o = valvetime(&["worst-case", "--m", "3", "--n", "1.85", "--format", "json", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let o = valvetime(&["ratio", "--input", out.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,m,n,t_cv,t_S,t_d_opt,t_mix,R,bound,poa,anomaly_flags"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn class_c_network_ratio() {
    let o = valvetime(&["worst-case", "--m", "2", "--n", "2", "--format", "json"]);
    let doc = json(&o);
    let net = doc["network"].to_string();
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "net.json", &net);
    let report = json(&valvetime(&["ratio", "--input", &path, "--format", "json"]));
    assert!(report["R"].as_f64().unwrap() >= 1.0);
    assert_eq!(report["m"], 2);
}

#[test]
fn plain_two_tap_network() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "two.json", TWO_TAP);
    let report = json(&valvetime(&["ratio", "--input", &path, "--format", "json"]));
    let r = report["R"].as_f64().unwrap();
    assert!((r - 1.133893).abs() < 1e-6, "{r}");
    assert!((report["bound"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);

    let o = valvetime(&["plan-discrete", "--input", &path, "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("step_index,duration,s1,s2\n"));

    let sel = json(&valvetime(&["plan-selfish", "--input", &path, "--format", "json"]));
    assert!(sel["t_S"].as_f64().unwrap() >= sel["t_cv"].as_f64().unwrap());
}

#[test]
fn props_suite_is_clean() {
    let o = valvetime(&["verify", "--suite", "props", "--trials", "500", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 violations"), "{}", stdout(&o));
}

#[test]
fn props_suite_has_no_csv() {
    let o = valvetime(&["verify", "--suite", "props", "--trials", "5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[Usage]"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &TWO_TAP.replace("\"sink_head\"", "\"extra\": 1, \"sink_head\""));
    let o = valvetime(&["solve", "--input", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error["));
    assert!(o.stdout.is_empty());

    assert_eq!(valvetime(&["ratio"]).status.code(), Some(1));
    assert_eq!(valvetime(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(valvetime(&["--help"]).status.code(), Some(0));
}

#[test]
fn numeric_errors_exit_two_and_leave_no_file() {
    // a zero-resistance path under positive head
    let net = TWO_TAP.replace("\"to\": \"t1\", \"k\": 1.0", "\"to\": \"t1\", \"k\": 0.0");
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "open.json", &net);
    let out = dir.path().join("result.json");
    let o = valvetime(&["solve", "--input", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("error[Unbounded]"), "{}", stderr(&o));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "two.json", TWO_TAP);
    for args in [
        vec!["ratio", "--input", &path, "--format", "json", "--samples", "12", "--seed", "5"],
        vec!["plan-continuous", "--input", &path, "--format", "json"],
        vec!["verify", "--suite", "bounds", "--trials", "30", "--seed", "11", "--format", "csv"],
        vec!["braess-demo", "--m", "3", "--n", "1.85", "--format", "json"],
    ] {
        let a = valvetime(&args);
        let b = valvetime(&args);
        assert!(a.status.success(), "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn braess_augmented_branches_recover_the_centralized_time() {
    let doc = json(&valvetime(&["braess-demo", "--m", "2", "--n", "2", "--format", "json"]));
    let open = doc["selfish_time_open_branches"].as_f64().unwrap();
    let augmented = doc["selfish_time_augmented"].as_f64().unwrap();
    assert!((open - 1.4072).abs() < 5e-5);
    assert!((augmented - 1.0).abs() < 1e-9);
}
