use std::process::{Command, Output};

use gafhole_cli::record::{payload, RunRecord};

fn gafhole(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gafhole")).args(args).output().expect("binary runs")
}

fn record_of(out: &Output) -> RunRecord {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    RunRecord::load(std::str::from_utf8(&out.stdout).unwrap()).unwrap()
}

#[test]
fn table_csv_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = gafhole(&["table", "--p", "0,1,e", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "p,q,Z_p,regime");
    assert_eq!(lines[2], "1.0,,,singular");
    let row0: Vec<f64> = lines[1].split(',').take(3).map(|v| v.parse().unwrap()).collect();
    let e = std::f64::consts::E;
    assert_eq!(row0[0], 0.0);
    assert!((row0[1] - e).abs() < 1e-12);
    assert!((row0[2] - e * e / 4.0).abs() < 1e-12);
    let row2: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(row2[1].parse::<f64>().unwrap(), 0.0);
    assert!((row2[2].parse::<f64>().unwrap() - e * e / 4.0).abs() < 1e-12);
    assert_eq!(row2[3], "p_ge_e");

    let rec = RunRecord::load(&std::fs::read_to_string(dir.path().join("t.csv.record")).unwrap()).unwrap();
    assert_eq!(rec.command, "table");
    let q = rec.results.get("rows").unwrap().get("row_0").unwrap().get("q").unwrap();
    assert_eq!(q.get("provenance").unwrap().as_str(), Some("closed_form"));
}

#[test]
fn measure_record_carries_report() {
    let rec = record_of(&gafhole(&["measure", "--alpha", "10", "--beta", "2", "--p", "0"]));
    let atom = rec.results.get("measure").unwrap().get("atoms").unwrap().get("atom_0").unwrap();
    assert_eq!(atom.get("radius").unwrap().number(), Some(1.0));
    assert!((atom.get("mass").unwrap().number().unwrap() - std::f64::consts::E / 10.0).abs() < 1e-15);
    assert!((rec.results.get("mass").unwrap().number().unwrap() - 1.0).abs() < 1e-12);
    let energy = rec.results.get("energy").unwrap();
    assert!(energy.get("i_gap").unwrap().number().unwrap() < 1e-8);
    assert!(energy.get("g_max").unwrap().number().unwrap() <= 1e-9);
}

#[test]
fn defaults_are_echoed() {
    let rec = record_of(&gafhole(&["check", "stirling"]));
    let keys: Vec<&str> = rec.params.iter().map(|(k, _)| k.as_str()).collect();
    for k in ["beta", "alpha", "p", "r", "trials", "seed", "grid", "threads", "out"] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(rec.results.get("pass").unwrap().as_str(), Some("true"));
}

#[test]
fn config_file_loses_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "beta = 1.0\nalpha = 20\np = 0.5\n").unwrap();
    let rec = record_of(&gafhole(&["measure", "--config", cfg.to_str().unwrap(), "--alpha", "30"]));
    let get = |k: &str| rec.params.iter().find(|(key, _)| key == k).unwrap().1.clone();
    assert_eq!(get("beta"), "1.0");
    assert_eq!(get("alpha"), "30.0");
    assert_eq!(get("p"), "0.5");
}

#[test]
fn exit_codes() {
    assert_eq!(gafhole(&["measure", "--p", "1"]).status.code(), Some(2));
    assert_eq!(gafhole(&["measure", "--beta", "-1"]).status.code(), Some(2));
    assert_eq!(gafhole(&["table", "--p", "x"]).status.code(), Some(2));
    assert_eq!(gafhole(&["varopt", "--grid", "50"]).status.code(), Some(2));
    assert_eq!(gafhole(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gafhole(&["check", "potential", "--alpha", "10", "--p", "0.5"]).status.code(), Some(0));
    // Tail check whose α violates the bound's hypothesis: α < 4^β.
    assert_eq!(gafhole(&["check", "tail", "--beta", "2", "--alpha", "10", "--trials", "2"]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_three() {
    // 20 samples cannot resolve the N = 1 histogram to 0.02.
    let out = gafhole(&["check", "density", "--trials", "20"]);
    assert_eq!(out.status.code(), Some(3));
    let rec = RunRecord::load(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(rec.results.get("pass").unwrap().as_str(), Some("false"));
}

#[test]
fn reruns_give_identical_payloads() {
    for args in [
        vec!["simulate", "dominant", "--r", "0.6", "--trials", "500", "--seed", "7"],
        vec!["simulate", "hole", "--r", "0.4", "--trials", "300", "--seed", "7"],
        vec!["varopt", "--alpha", "10", "--p", "2", "--grid", "200"],
    ] {
        let a = record_of(&gafhole(&args));
        let b = record_of(&gafhole(&args));
        assert_eq!(payload(&a.results), payload(&b.results));
    }
}
