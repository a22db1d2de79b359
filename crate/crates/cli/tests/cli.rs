use std::path::Path;
use std::process::{Command, Output};

fn kiva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kiva")).args(args).output().unwrap()
}

fn generate(dir: &Path) -> String {
    let path = dir.join("inst.json").display().to_string();
    let out = kiva(&[
        "generate", "--n", "12", "--m", "2", "--capacity", "3", "--beta", "4", "--skus", "20", "--seed", "5", "--out",
        &path,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_solve_verify() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path());
    for method in ["sa", "roa", "rb"] {
        let sol = dir.path().join(format!("{method}.json")).display().to_string();
        let out = kiva(&["solve", "--instance", &inst, "--method", method, "--seed", "1", "--out", &sol]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let out = kiva(&["verify", "--instance", &inst, "--solution", &sol]);
        assert_eq!(out.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("feasible"));
    }
}

#[test]
fn solve_prints_json_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path());
    let out = kiva(&["solve", "--instance", &inst, "--method", "rb", "--trace"]);
    assert!(out.status.success());
    let sol: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(sol.get("theta").is_some() && sol.get("mu").is_some());
    assert!(!out.stderr.is_empty());
}

#[test]
fn infeasible_solution_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path());
    let sol = dir.path().join("bad.json");
    let text = serde_json::json!({
        "theta": [[0, 1, 2, 3, 4, 5], [6, 7, 8, 9, 10, 11]],
        "mu": [[], []]
    });
    std::fs::write(&sol, text.to_string()).unwrap();
    let out = kiva(&["verify", "--instance", &inst, "--solution", sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stdout.is_empty());
}

#[test]
fn invalid_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json").display().to_string();
    assert_eq!(kiva(&["solve", "--instance", &missing]).status.code(), Some(2));

    let inst = generate(dir.path());
    let out = kiva(&["solve", "--instance", &inst, "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kiva(&["solve", "--instance", &inst, "--bw-list", "4,1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = kiva(&[
        "generate", "--n", "4", "--m", "2", "--capacity", "1", "--beta", "9", "--skus", "3", "--out",
        &dir.path().join("x.json").display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.json");
    std::fs::write(
        &cfg,
        r#"{"methods":["sa","rb"],"repetitions":2,"master_seed":3,
            "cells":[{"n":8,"m":2,"capacity":2,"beta":3,"skus":12}]}"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let out = kiva(&["bench", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,seed,n,m,C,beta,sol,cpu_s,rd,of");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("sa,") && lines[2].starts_with("rb,"));
}
