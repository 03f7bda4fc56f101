use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridcascade"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn solve_prints_json() {
    let grid = data("five_node.grid");
    let out = run(&["solve", grid.to_str().unwrap(), "--json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn config_errors_exit_with_one() {
    assert_eq!(run(&["solve", "/no/such/file.grid"]).status.code(), Some(1));
    let grid = data("five_node.grid");
    let out = run(&[
        "cascade",
        grid.to_str().unwrap(),
        "--attack",
        "1-2",
        "--alpha",
        "-1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn campaign_writes_summary_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let grid = data("five_node.grid");
    let out = run(&[
        "campaign",
        grid.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--parallelism",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["attacks_run"], 7);
    let traces = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("trace_")
        })
        .count();
    assert_eq!(traces, 7);
}
