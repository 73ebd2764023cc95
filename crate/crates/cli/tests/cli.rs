use std::fs;
use std::process::{Command, Output};

fn pnlw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnlw")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_prints_the_catalog() {
    let o = pnlw(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("parseval ")));
    assert!(text.lines().any(|l| l.starts_with("all-acceptance ")));

    let o = pnlw(&["list", "--json"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rows.as_array().unwrap().len() >= 21);
}

#[test]
fn passing_run_exits_zero_and_writes_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnlw(&["chart-roundtrip", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("PASS chart-roundtrip/chart-roundtrip")));
    let run = fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    assert!(run.join("manifest.json").exists());
    assert!(run.join("result.json").exists());
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnlw(&["parseval", "--set", "n_max=4", "--set", "tolerances.parseval=0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL parseval/parseval"));
}

#[test]
fn invalid_manifest_exits_two_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnlw(&["simulate", "--set", "sigma=0.7", "--set", "dt=-1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sigma") && err.contains("dt"), "{err}");
}

#[test]
fn config_file_parameters_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("m.json");
    fs::write(&config, r#"{"experiment": "ignored", "seed": 5, "params": {"n_max": 3}}"#).unwrap();
    let out = dir.path().join("runs");
    let o = pnlw(&["parseval", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let run = fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["experiment"], "parseval");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["params"]["n_max"], 3);
}
