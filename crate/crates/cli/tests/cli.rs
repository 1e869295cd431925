use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn subsys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subsys"))
        .args(args)
        .env_remove("SUBSYS_TOL")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen_random(dir: &Path, d1: usize, d2: usize, rank: usize, seed: u64) -> String {
    let out = path(dir, &format!("sys_{d1}_{d2}_{rank}_{seed}.json"));
    let o = subsys(&[
        "gen-random",
        "--d1",
        &d1.to_string(),
        "--d2",
        &d2.to_string(),
        "--rank",
        &rank.to_string(),
        "--seed",
        &seed.to_string(),
        "--output",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn decompose_uncoupled_system() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_random(dir.path(), 3, 4, 0, 1);
    let rep = path(dir.path(), "dec.json");
    let o = subsys(&["decompose", "--input", &sys, "--tol", "1e-10", "--output", &rep]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(v["tol"], 1e-10);
    let r = &v["report"];
    assert_eq!([&r["dim_h1d"], &r["dim_h1c"], &r["dim_h2c"], &r["dim_h2d"]], [3, 0, 0, 4]);
}

#[test]
fn verify_theorem_prints_distances() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_random(dir.path(), 5, 8, 2, 42);
    let o = subsys(&["verify-theorem", "--input", &sys]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("tol=1e-10"));
    let distances: Vec<f64> = text
        .lines()
        .filter(|l| l.contains(" vs "))
        .map(|l| l.rsplit(": ").next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(distances.len(), 11);
    assert!(distances.iter().all(|&d| d <= 1e-9), "{text}");
}

#[test]
fn compare_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_random(dir.path(), 2, 3, 1, 9);
    let rep = path(dir.path(), "cmp.json");
    let o = subsys(&["compare", "--input", &sys, "--t-max", "10", "--steps", "2000", "--output", &rep]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("sup-norm discrepancy"));
    let v: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    let order = v["report"]["order"].as_f64().unwrap();
    assert!((order - 2.0).abs() < 0.3, "order {order}");

    let o = subsys(&["compare", "--input", &sys, "--steps", "200", "--max-diff", "1e-12"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("discrepancy"));
}

#[test]
fn malformed_input_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    fs::write(&bad, "{\n  \"d1\": 1,\n  \"d2\": oops\n}").unwrap();
    let o = subsys(&["decompose", "--input", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let short = path(dir.path(), "short.json");
    fs::write(
        &short,
        r#"{"d1": 2, "d2": 1, "tol": 1e-10, "omega1": [[[0,0],[0,0]]], "omega2": [[[0,0]]], "gamma": [[[1,0]],[[0,0]]]}"#,
    )
    .unwrap();
    let o = subsys(&["decompose", "--input", &short]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("omega1"), "{}", stderr(&o));

    let o = subsys(&["decompose", "--input", &path(dir.path(), "missing.json")]);
    assert_eq!(o.status.code(), Some(2));
    let o = subsys(&["compare", "--input", &gen_random(dir.path(), 1, 1, 1, 0), "--steps", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = subsys(&["decompose"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_random(dir.path(), 4, 6, 2, 3);
    let again = path(dir.path(), "again.json");
    assert!(subsys(&["gen-random", "--d1", "4", "--d2", "6", "--rank", "2", "--seed", "3", "--output", &again])
        .status
        .success());
    assert_eq!(fs::read(&sys).unwrap(), fs::read(&again).unwrap());

    let mut outputs = Vec::new();
    for name in ["a.json", "b.json"] {
        let rep = path(dir.path(), name);
        assert!(subsys(&["verify-theorem", "--input", &sys, "--output", &rep]).status.success());
        outputs.push(fs::read(&rep).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn tolerance_from_environment_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_random(dir.path(), 2, 2, 1, 5);
    let o = Command::new(env!("CARGO_BIN_EXE_subsys"))
        .args(["decompose", "--input", &sys])
        .env("SUBSYS_TOL", "1e-9")
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tol"], 1e-9);
    assert_eq!(v["report"]["tol"], 1e-9);

    let o = subsys(&["decompose", "--input", &sys, "--tol", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lattice_roundtrip_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let sys = path(dir.path(), "lat.json");
    let meta = path(dir.path(), "meta.json");
    let o = subsys(&["gen-lattice", "--dims", "3", "--box", "4", "--cube", "2", "--output", &sys, "--metadata", &meta]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file: Value = serde_json::from_str(&fs::read_to_string(&sys).unwrap()).unwrap();
    assert_eq!(file["d1"], 8);
    assert_eq!(file["d2"], 56);
    assert_eq!(file["metadata"]["surface_count"], 8);
    assert_eq!(file["metadata"]["multiplicity_bound"], 16);
    let m: Value = serde_json::from_str(&fs::read_to_string(&meta).unwrap()).unwrap();
    assert_eq!(m["report"]["cube"], 2);

    let o = subsys(&["decompose", "--input", &sys]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["dim_h1c"], 8);
    assert!(subsys(&["verify-theorem", "--input", &sys]).status.success());
}

#[test]
fn csv_outputs_have_expected_headers() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_random(dir.path(), 2, 3, 1, 7);
    let init = path(dir.path(), "init.json");
    fs::write(&init, "[[1.0, 0.0], [0.0, 0.0]]").unwrap();

    let full = path(dir.path(), "full.csv");
    let o = subsys(&["simulate-full", "--input", &sys, "--t-max", "1", "--steps", "10", "--output", &full]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&full).unwrap();
    assert!(text.starts_with("time,re_0,im_0,re_1,im_1,"));
    assert_eq!(text.lines().count(), 12);

    let red = path(dir.path(), "red.csv");
    let o = subsys(&[
        "simulate-reduced", "--input", &sys, "--initial", &init, "--t-max", "1", "--steps", "10", "--output", &red,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&red).unwrap().starts_with("time,re_0,im_0,re_1,im_1\n"));

    let ker = path(dir.path(), "k.csv");
    let o = subsys(&["kernel", "--input", &sys, "--side", "hidden", "--steps", "4", "--output", &ker]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&ker).unwrap().lines().count(), 6);

    fs::write(&init, "[[1.0, 0.0]]").unwrap();
    let o = subsys(&["simulate-reduced", "--input", &sys, "--initial", &init, "--output", &red]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn no_gain_passes_on_random_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_random(dir.path(), 3, 5, 2, 11);
    let rep = path(dir.path(), "ng.json");
    let o = subsys(&["no-gain", "--input", &sys, "--trials", "10", "--output", &rep]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(v["report"]["passed"], true);
    assert_eq!(v["report"]["trials"].as_array().unwrap().len(), 10);
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        "gen-random", "gen-lattice", "decompose", "verify-theorem", "kernel", "simulate-full", "simulate-reduced",
        "compare", "no-gain",
    ] {
        let o = subsys(&[cmd, "--help"]);
        assert!(o.status.success(), "{cmd}");
        assert!(stdout(&o).contains("Usage"), "{cmd}");
    }
}
