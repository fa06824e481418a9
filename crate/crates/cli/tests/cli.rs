use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tcg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcg"))
        .args(args)
        .env_remove("TCG_ENUM_CAP")
        .env_remove("TCG_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const RED_AGENT_TREE: &str = "[0,1,2,3,1,5,0,7,8,7,10,0,12,13,12,15]";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn verify_reports_the_red_agent_witness() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "unstable.json", RED_AGENT_TREE);
    let o = tcg(&["verify", "--profile", &f]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(text.starts_with("UNSTABLE\n"));
    assert!(text.contains("witness: agent 8 (node 9) -> node 6: 13/5 -> 109/42"), "{text}");

    let o = tcg(&["--json", "verify", "--profile", &f]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["stable"], false);
    assert_eq!(v["witness"]["new_cost"], "109/42");
}

#[test]
fn verify_accepts_codes_and_stable_trees() {
    let o = tcg(&["verify", "--code", "((((())))((())))"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("STABLE\n"));
}

#[test]
fn balanced_example() {
    let o = tcg(&["balanced", "--seq", "0,1,2,4,9", "--verify"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("STABLE\n"));
    assert!(text.contains("n=189 SC=441"), "{text}");
    assert!(!text.contains("subtree_sc"));
    let o = tcg(&["balanced", "--seq", "0,1,2,4,9", "--stats"]);
    assert!(stdout(&o).contains("subtree_sc=0,1,6,40,441"));
}

#[test]
fn balanced_construction_cap_is_a_resource_limit() {
    let o = tcg(&["balanced", "--extremal", "7", "--verify"]);
    assert_eq!(code(&o), 3);
    let o = tcg(&["--construction-cap", "100", "balanced", "--seq", "0,1,2,4,9", "--verify"]);
    assert_eq!(code(&o), 3);
    let o = tcg(&["balanced", "--extremal", "7"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("n=11125570 "));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&tcg(&[])), 2);
    assert_eq!(code(&tcg(&["verify"])), 2);
    assert_eq!(code(&tcg(&["dynamics", "--n", "4", "--policy", "sideways"])), 2);
    assert_eq!(code(&tcg(&["balanced", "--seq", "0,x,2"])), 2);
    assert_eq!(code(&tcg(&["metrics", "--range", "9..3"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.json", "[0,1");
    let o = tcg(&["verify", "--profile", &f]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));
}

#[test]
fn caps_come_from_flags_and_environment() {
    assert_eq!(code(&tcg(&["enumerate", "--n", "21"])), 3);
    assert_eq!(code(&tcg(&["--enum-cap", "5", "enumerate", "--n", "6"])), 3);
    let o = Command::new(env!("CARGO_BIN_EXE_tcg"))
        .args(["enumerate", "--n", "6"])
        .env("TCG_ENUM_CAP", "5")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    assert_eq!(code(&tcg(&["path-search", "--n", "19"])), 3);
}

#[test]
fn enumerate_output_is_deterministic_and_rereadable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = tcg(&["enumerate", "--n", "10", "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    let ra = fs::read(a.path().join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.path().join("report.json")).unwrap());
    let o = tcg(&["--jobs", "1", "enumerate", "--n", "10", "--json"]);
    assert_eq!(o.stdout, ra);

    let profiles: Vec<_> = fs::read_dir(a.path().join("profiles")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(!profiles.is_empty());
    for p in profiles {
        assert_eq!(code(&tcg(&["verify", "--profile", p.to_str().unwrap()])), 0, "{}", p.display());
    }
    assert!(a.path().join("dot").join("n010_eq0.dot").exists());
}

#[test]
fn report_writes_selected_formats() {
    let d = tempfile::tempdir().unwrap();
    let o = tcg(&["report", "--range", "3..6", "--out", d.path().to_str().unwrap(), "--formats", "csv"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(d.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(!d.path().join("report.json").exists());
    assert!(!d.path().join("dot").exists());
}

#[test]
fn metrics_writes_json_and_csv() {
    let d = tempfile::tempdir().unwrap();
    let j = d.path().join("m.json");
    let c = d.path().join("m.csv");
    let o = tcg(&["metrics", "--range", "4..8", "--out", j.to_str().unwrap(), "--csv", c.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&j).unwrap()).unwrap();
    assert_eq!(v["quality"].as_array().unwrap().len(), 5);
    assert_eq!(v["quality"][0]["pos_ratio"], "3/2");
    assert!(fs::read_to_string(&c).unwrap().starts_with("n,trees_scanned,"));
}

#[test]
fn dynamics_is_seeded_and_its_output_rereads() {
    let d = tempfile::tempdir().unwrap();
    let fin = d.path().join("final.json");
    let args = ["dynamics", "--n", "12", "--seed", "7", "--policy", "max-improvement", "--out", fin.to_str().unwrap()];
    let first = tcg(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(stdout(&first), stdout(&tcg(&args)));
    let v: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["policy"], "max-improvement");
    let verdict = tcg(&["verify", "--profile", fin.to_str().unwrap()]);
    if v["kind"] == "Converged" {
        assert_eq!(code(&verdict), 0);
    } else {
        assert_eq!(code(&verdict), 1);
    }
}

#[test]
fn dynamics_from_a_stable_profile_does_not_move() {
    let o = tcg(&["dynamics", "--code", "((((())))((())))"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "Converged");
    assert_eq!(v["trajectory_length"], 0);
}

#[test]
fn dynamics_at_sixteen_never_converges() {
    let o = tcg(&["dynamics", "--n", "16", "--runs", "5", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let runs = v.as_array().unwrap();
    assert_eq!(runs.len(), 5);
    assert!(runs.iter().all(|r| r["kind"] != "Converged"));
    assert_eq!(runs[4]["seed"], 7);
}

#[test]
fn path_verify_tree_and_pair() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "unstable.json", RED_AGENT_TREE);
    let o = tcg(&["path-verify", "--profile", &f]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("13/5 -> 109/42"));

    let host = write(d.path(), "host.json", "[0,1,2,3,4,1,6,7,8,0,10,11,10,13,0,15,16,15,18]");
    let o = tcg(&["--json", "path-verify", "--profile", &host, "--pairs"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["stable"], true);
    assert_eq!(v["pair_deviation"]["new_costs"][0], "109/42");
    assert_eq!(v["pair_deviation"]["new_costs"][1], "109/42");
}

#[test]
fn path_verify_rejects_non_tree_path_profiles() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "paths.json", r#"{"paths":[[1,0],[2,0],[3,1,0],[4,2,0],[5,3,2,0]]}"#);
    assert_eq!(code(&tcg(&["path-verify", "--paths", &f])), 1);
    let f = write(d.path(), "broken.json", r#"{"paths":[[1,2]]}"#);
    assert_eq!(code(&tcg(&["path-verify", "--paths", &f])), 2);
}

#[test]
fn path_search_small() {
    let o = tcg(&["--json", "path-search", "--n", "8"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["count"].as_u64().unwrap() >= 1);
}
