use std::path::Path;
use std::process::{Command, Output};

fn riesz_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riesz-lab"))
        .args(args)
        .env("RIESZ_LAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("cfg.json");
    let text = format!(
        r#"{{"grid": {{"L": 16, "M": 2048}}, "atoms": {{"count": 2}}, "r_list": [1.0], "r_grid": {{"count": 6}}{extra}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert!(riesz_lab(&["--help"]).status.success());
    assert_eq!(riesz_lab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(riesz_lab(&["verify", "--check", "nothing"]).status.code(), Some(1));
}

#[test]
fn kernel_envelope_saturates() {
    let dir = tempfile::tempdir().unwrap();
    let out = riesz_lab(&["kernel", "--n", "1", "--p", "0.6666666666666666", "--R", "1", "--radius", "100", "--alpha-max", "2", "--out", dir.path().to_str().unwrap()]);
    let summary = json_stdout(&out);
    let ratio = summary["saturation_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    assert!((summary["delta"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let csv = std::fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert!(csv.starts_with("abs_x,phi,envelope"));
    assert!(csv.lines().count() > 100);
    assert_eq!(read_json(&dir.path().join("kernel.json")), summary);
}

#[test]
fn atom_then_operator_then_norms() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let v = json_stdout(&riesz_lab(&["atom", "--r", "1", "--seed", "3", "--weight", "power:-0.5", "--L", "16", "--M", "2048", "--out", d]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["s"], 0);
    let atom_csv = dir.path().join("atom.csv");
    assert!(atom_csv.exists() && dir.path().join("atom.json").exists());

    let input = atom_csv.to_str().unwrap();
    for route in ["spectral", "convolution", "maximal"] {
        let out_dir = dir.path().join(route);
        let meta = json_stdout(&riesz_lab(&[
            "operator", "--input", input, "--R", "2", "--delta", "0.5", "--route", route, "--out", out_dir.to_str().unwrap(),
        ]));
        assert_eq!(meta["route"], route);
        assert!(out_dir.join("output.csv").exists());
        assert!(meta["output_max_abs"].as_f64().unwrap() > 0.0);
    }

    let norms = json_stdout(&riesz_lab(&["norms", "--input", input, "--p", "0.6666666666666666", "--weight", "power:-0.5"]));
    let strong = norms["strong"]["value"].as_f64().unwrap();
    let weak = norms["weak"]["value"].as_f64().unwrap();
    assert!(weak <= strong * (1.0 + 1e-12));
    assert!(norms["weak_hardy"]["value"].as_f64().unwrap() > 0.0);
    assert!(norms["hardy"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn weights_report_for_singular_power() {
    let v = json_stdout(&riesz_lab(&["weights", "--kind", "power", "--a", "-0.5", "--q", "2"]));
    assert_eq!(v["q_w_estimate"], 1.0);
    assert!(v["A_q_estimate"].as_f64().unwrap() >= 1.0);
    assert!(v["refinement_ratio"].as_f64().unwrap() < 2.0);
    assert!(v["family_size"].as_u64().unwrap() > 0);
}

#[test]
fn verify_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = riesz_lab(&["verify", "--config", &cfg, "--check", "lemma42,lemma41", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(&out_dir.join("report.json"));
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["superposition", "kernel_decay"]);
    assert!(out_dir.join("summary.csv").exists());
    assert!(out_dir.join("timing.json").exists());
    assert!(out_dir.join("plots").is_dir());
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let over = small_config(dir.path(), r#", "superposition": {"normalization": 2.0}"#);
    let out = riesz_lab(&["verify", "--config", &over, "--check", "superposition", "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let integer = dir.path().join("integer.json");
    std::fs::write(&integer, r#"{"n": 2, "p": 0.4}"#).unwrap();
    let out = riesz_lab(&["verify", "--config", integer.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integer"));
}

#[test]
fn rejects_bad_thread_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_riesz-lab"))
        .args(["weights"])
        .env("RIESZ_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_is_deterministic_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let mut reports = Vec::new();
    for run in ["one", "two"] {
        let out_dir = dir.path().join(run);
        let out = riesz_lab(&["verify", "--config", &cfg, "--check", "lemma43,eq6", "--format", "json", "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
        assert!(!out_dir.join("summary.csv").exists());
    }
    assert_eq!(reports[0], reports[1]);
}
