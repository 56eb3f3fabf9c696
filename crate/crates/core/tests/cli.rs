use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn zrp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zrp"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

#[test]
fn run_passes_and_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let status = zrp()
            .args(["run", "--config"])
            .arg(config("couplings.json"))
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(0));
        let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["pass"], true);
        outputs.push((fs::read(out.join("summary.csv")).unwrap(), fs::read(out.join("events/replica_0000.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bad_config_exits_1_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = fs::read_to_string(config("poisson_case.json")).unwrap().replace("\"replicas\": 2000", "\"replicas\": -4");
    fs::write(&path, text).unwrap();
    let out = zrp().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicas"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_exits_1() {
    let out = zrp().args(["run", "--config", "/nonexistent/zrp.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn smoke_subset_prints_one_line_per_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    let out = zrp().args(["suite", "smoke", "--only", "1,2,10", "--out"]).arg(&summary).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).collect();
    assert_eq!(lines.len(), 3, "{stdout}");
    let v: serde_json::Value = serde_json::from_slice(&fs::read(summary).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn empty_selection_is_an_error() {
    let out = zrp().args(["suite", "smoke", "--only", "99"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no tests selected"));
}
