use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn corrgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrgap")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("corrgap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn gap_on_threshold_instance() {
    let v = json(&corrgap(&["gap", "--builtin", "example3", "--n", "3"]));
    assert!((v["worst_value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["independent_value"].as_f64().unwrap() - 19.0 / 27.0).abs() < 1e-12);
    assert!((v["kappa"].as_f64().unwrap() - 27.0 / 19.0).abs() < 1e-9);
}

#[test]
fn gap_on_block_cover_instance() {
    let v = json(&corrgap(&["gap", "--builtin", "example2", "--k", "4"]));
    assert!((v["worst_value"].as_f64().unwrap() - 4.0).abs() < 1e-6);
    assert!(v["kappa"].as_f64().unwrap() > 2.0);
}

#[test]
fn welfare_integrality_gap() {
    let v = json(&corrgap(&["welfare", "--builtin", "integrality_gap"]));
    assert_eq!(v["opt_ip"].as_f64(), Some(11.0));
    assert!((v["upper_bound"].as_f64().unwrap() - 12.0).abs() < 1e-9);
}

#[test]
fn robust_min_flow() {
    let v = json(&corrgap(&["robust", "--builtin", "example1", "--n", "4"]));
    assert_eq!(v["x_robust"]["index"].as_u64(), Some(4));
    assert_eq!(v["x_independent"]["index"].as_u64(), Some(3));
    assert!((v["ratio"].as_f64().unwrap() - 11.0 / 6.0).abs() < 1e-9);
    assert_eq!(v["chain_holds"].as_bool(), Some(true));
}

#[test]
fn instance_file_round_trip() {
    let path = scratch(
        "threshold.json",
        r#"{"function":{"type":"explicit","n":2,"values":[0,1,1,1]},"marginals":[0.5,0.5]}"#,
    );
    let v = json(&corrgap(&["gap", "--instance", path.to_str().unwrap()]));
    assert!((v["worst_value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["independent_value"].as_f64().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn marginal_outside_unit_interval_is_a_validation_error() {
    let path = scratch(
        "bad.json",
        r#"{"function":{"type":"explicit","n":2,"values":[0,1,1,1]},"marginals":[1.5,0.5]}"#,
    );
    let out = corrgap(&["gap", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_input_exit_codes() {
    let path = scratch("garbage.json", "{not json");
    assert_eq!(corrgap(&["gap", "--instance", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(corrgap(&["gap", "--builtin", "no_such_instance"]).status.code(), Some(2));
    assert_eq!(corrgap(&["gap", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn size_caps_exit_with_three() {
    assert_eq!(corrgap(&["gap", "--builtin", "example3", "--n", "17"]).status.code(), Some(3));
    assert_eq!(corrgap(&["gap", "--builtin", "example2", "--k", "5"]).status.code(), Some(3));
}

#[test]
fn monte_carlo_needs_a_seed() {
    assert_eq!(corrgap(&["gap", "--builtin", "example3", "--samples", "1000"]).status.code(), Some(2));
    let a = corrgap(&["gap", "--builtin", "example3", "--samples", "2000", "--seed", "7"]);
    let b = corrgap(&["gap", "--builtin", "example3", "--samples", "2000", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_corrgap"))
            .args(["welfare", "--builtin", "coverage", "--seed", "3", "--players", "3"])
            .env("CORRGAP_THREADS", threads)
            .output()
            .unwrap()
    };
    let (one, four) = (run("1"), run("4"));
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn csv_and_out_file() {
    let out = corrgap(&["gap", "--builtin", "example2", "--k", "3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,worst_value,independent_value,kappa,bound,bound_satisfied"));
    assert!(lines.next().unwrap().starts_with("example2,3.0,"));

    let target = scratch("report.json", "");
    let out = corrgap(&["worst-case", "--builtin", "example3", "--out", target.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!(v.is_object());
}

#[test]
fn every_listed_builtin_runs() {
    let list = json(&corrgap(&["--list-instances"]));
    let names: Vec<&str> = list.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert!(names.len() >= 7);
    for name in names {
        let out = corrgap(&["verify", "--builtin", name]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let out = corrgap(&["gap", "--builtin", name]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn split_and_certify_commands() {
    let v = json(&corrgap(&["split-verify", "--builtin", "example3", "--n", "3", "--counts", "2,1,3"]));
    assert_eq!(v["p1_monotone"].as_bool(), Some(true));
    assert_eq!(v["p2_worst_case_preserved"].as_bool(), Some(true));
    assert_eq!(v["p3_independent_not_increased"].as_bool(), Some(true));

    let v = json(&corrgap(&["certify-scheme", "--builtin", "example3", "--n", "2", "--counts", "2,1", "--partition", "1,0,0"]));
    assert_eq!(v["incremental"]["cross_monotone"].as_bool(), Some(true));
    assert_eq!(v["partial_prefix"]["holds"].as_bool(), Some(true));
    // a block holding two copies of one element is rejected
    let out = corrgap(&["certify-scheme", "--builtin", "example3", "--n", "2", "--counts", "2,1", "--partition", "0,0,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_all_passes() {
    let v = json(&corrgap(&["verify", "--all"]));
    assert_eq!(v["all_pass"].as_bool(), Some(true));
    assert_eq!(v["failed"].as_u64(), Some(0));
}
