use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dopt")).args(args).output().expect("spawn dopt")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dopt-it-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_ls_relax_brute_round_trip() {
    let dir = workdir("roundtrip");
    let inst = dir.join("inst.json");
    let out = dopt(&["gen", "--variant", "unconstrained", "--d", "3", "--fixed-first", "--k", "6", "-o", s(&inst)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let ls_dir = dir.join("ls");
    let out = dopt(&["ls", "--instance", s(&inst), "--seed", "4", "--pricer", "enum", "-o", s(&ls_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&ls_dir.join("report.json"));
    assert_eq!(report["proved_local_optimum"], true);
    let manifest = read_json(&ls_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "ls");
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["rng"], "chacha8/rand0.8");
    assert_eq!(manifest["instance_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["tolerances"]["tol_improve"].is_number());

    // warm start from the written design is already optimal
    let ls2 = dir.join("ls2");
    let out = dopt(&["ls", "--instance", s(&inst), "--warm-start", s(&ls_dir.join("design.json")), "-o", s(&ls2)]);
    assert_eq!(out.status.code(), Some(0));
    let r2 = read_json(&ls2.join("report.json"));
    assert_eq!(r2["trace"], serde_json::json!([]));
    assert_eq!(r2["final_logdet"], report["final_logdet"]);

    let relax_dir = dir.join("relax");
    let out = dopt(&["relax", "--instance", s(&inst), "-o", s(&relax_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let relax = read_json(&relax_dir.join("relaxation.json"));
    let expected = 3.0 * 6f64.ln() - 4.0 * 2f64.ln();
    assert!((relax["master_objective"].as_f64().unwrap() - expected).abs() < 1e-6);
    assert_eq!(relax["certificate"]["scope"], "full");
    let trace = fs::read_to_string(relax_dir.join("trace.jsonl")).unwrap();
    assert!(trace.lines().count() >= 1);
    for line in trace.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["master_obj"].is_number());
    }

    let out = dopt(&["brute", "--instance", s(&inst)]);
    assert_eq!(out.status.code(), Some(0));
    let brute: Value = serde_json::from_slice(&out.stdout).unwrap();
    let opt = brute["brute"]["optimum_logdet"].as_f64().unwrap();
    assert!(opt <= relax["upper_bound"].as_f64().unwrap() + 1e-9);
    assert!(report["final_logdet"].as_f64().unwrap() <= opt + 1e-9);
}

#[test]
fn suite_writes_csv_with_fixed_columns() {
    let dir = workdir("suite");
    let out = dopt(&[
        "--threads",
        "2",
        "suite",
        "--variant",
        "cardinality",
        "--d-min",
        "6",
        "--d-max",
        "7",
        "--seeds",
        "0,1",
        "-o",
        s(&dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "d,k,seed,ls_value,relax_value,gap,ls_time,cg_time,ip_calls,iterations,status");
    assert_eq!(lines.count(), 4);
    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["threads"], 2);
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1]));
}

#[test]
fn exit_codes() {
    let dir = workdir("codes");
    let out = dopt(&["relax", "--instance", s(&dir.join("missing.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(out.stderr.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(err["level"], "error");

    let out = dopt(&["gen", "--variant", "knapsack"]);
    assert_eq!(out.status.code(), Some(1));

    // x₁ = 1 with 1ᵀx ≤ 1 admits a single point
    let inst = dir.join("card.json");
    assert!(dopt(&["gen", "--variant", "cardinality", "--d", "4", "--r", "1", "-o", s(&inst)]).status.success());
    let out = dopt(&["ls", "--instance", s(&inst)]);
    assert_eq!(out.status.code(), Some(2));

    let inst = dir.join("cube.json");
    assert!(dopt(&["gen", "--variant", "unconstrained", "--d", "6", "--k", "14", "-o", s(&inst)]).status.success());
    let out = dopt(&["brute", "--instance", s(&inst), "--cap", "1000"]);
    assert_eq!(out.status.code(), Some(3));

    let out = dopt(&["ls", "--instance", s(&inst), "--tol-improve", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}
