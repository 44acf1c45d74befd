//! Exit-code contract: 0 success, 1 validation/parse failure, 2 internal
//! invariant violation; failures never leave partial outputs behind.

use std::process::Command;

fn run(dir: &std::path::Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lvldrive"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn unknown_subcommand_is_code_1_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"), "no usage text: {stderr}");
}

#[test]
fn empty_predictions_file_is_code_1_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    std::fs::write(dir.path().join("gt.json"), "[]").unwrap();
    let out = run(dir.path(), &["eval", "grounding", "--pred", "empty.jsonl",
        "--gt", "gt.json", "--out", "report.json"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("empty.jsonl"), "file not named: {stderr}");
    assert!(!dir.path().join("report.json").exists(), "partial report written");
}

#[test]
fn missing_scene_file_is_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["qa", "gen", "--scene", "absent.json", "--out", "qa.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("qa.jsonl").exists());
}

#[test]
fn unknown_toy_task_is_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["fusion", "toy-train", "--task", "bogus", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bogus"), "task not named: {stderr}");
}

#[test]
fn fusion_check_passes_on_fresh_build() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["fusion", "check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ok - reference gradient check"), "{stderr}");
}

#[test]
fn help_is_code_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("scene"), "{stdout}");
}
