//! End-to-end tests for the binary: output formats and exit codes.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigma-halving"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn trajectory_plain_reaches_one() {
    let out = run(&["trajectory", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("5 -> 6 -> 3 -> 4 -> 2 -> 1"));
    assert!(text.contains("reached 1 in 5 steps"));
}

#[test]
fn trajectory_json_is_well_formed() {
    let out = run(&["trajectory", "19", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["start"], "19");
    assert_eq!(v["outcome"]["kind"], "reached_one");
    assert_eq!(v["outcome"]["steps"], 8);
    assert_eq!(v["steps"]["values"][0], "19");
    assert_eq!(v["steps"]["values"][1], "20");
}

#[test]
fn trajectory_budget_flag_yields_exit_2() {
    let out = run(&["trajectory", "9", "--max-steps", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("undecided"));
}

#[test]
fn trajectory_budget_env_override() {
    let out = Command::new(env!("CARGO_BIN_EXE_sigma-halving"))
        .args(["trajectory", "9"])
        .env("SIGMA_HALVING_MAX_STEPS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trajectory_rejects_garbage_input() {
    let out = run(&["trajectory", "not-a-number"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_small_range_with_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.jsonl");
    let out = run(&[
        "sweep",
        "--from",
        "1",
        "--to",
        "1000",
        "--checkpoint",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("verified frontier: 1000"));
    let content = std::fs::read_to_string(&path).unwrap();
    let last = content.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(last).unwrap();
    assert_eq!(v["frontier"], 1000);
}

#[test]
fn descent_histogram_prints_maximum() {
    let out = run(&["descent", "--from", "1", "--to", "100"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("maximum: k = 4 at n = 81"));
}

#[test]
fn families_listing_and_closure() {
    let out = run(&["families", "--level", "1", "--bound", "200"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("3 7 31 127"));

    let out = run(&["families", "--level", "1", "--bound", "30", "--closure"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("29"));
}

#[test]
fn abundancy_single_value() {
    let out = run(&["abundancy", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("I(6) = 2/1"));
    assert!(text.contains("perfect: true"));
}

#[test]
fn abundancy_search_emits_csv() {
    let out = run(&["abundancy", "--search", "2/1", "--bound", "10000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,numerator,denominator,classification");
    assert_eq!(lines[1], "6,2,1,perfect");
    assert_eq!(lines[2], "28,2,1,perfect");
    assert_eq!(lines[3], "496,2,1,perfect");
    assert_eq!(lines[4], "8128,2,1,perfect");
}

#[test]
fn abundancy_requires_value_or_search() {
    let out = run(&["abundancy"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_product_converges() {
    let out = run(&["verify-product", "3,5,19"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("285 reaches 1 in"));
}

#[test]
fn verify_product_rejects_outsiders() {
    let out = run(&["verify-product", "3,29"]);
    // 29 is admitted only through the closure, which the CLI builds, so
    // check a genuinely bad member instead: a repeated prime
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["verify-product", "3,3"]);
    assert_eq!(out.status.code(), Some(1));
}
