use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models().join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_campana"))
        .args(args)
        .env_remove("CAMPANA_CENSUS_CACHE")
        .output()
        .expect("spawn campana")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn classify_codes() {
    let halves = model("p1_halves.toml");
    let o = run(&["classify", "--model", &halves, "--point", "8,9", "--json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["class"], "campana");

    let o = run(&["classify", "--model", &halves, "--point", "2,3", "--json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["witness"], 2);

    let o = run(&["classify", "--model", &halves, "--point", "-4,9"]);
    assert_eq!(code(&o), 0);

    assert_eq!(code(&run(&["classify", "--model", &halves, "--point", "0,1"])), 3);
    assert_eq!(code(&run(&["classify", "--model", "/nonexistent.toml", "--point", "1,1"])), 2);
    assert_eq!(code(&run(&["classify", "--model", &halves, "--point", "1,2,3"])), 2);
    assert_eq!(code(&run(&["classify", "--model", &halves, "--point", "1,1", "--eps", "0.5,1/2"])), 2);
}

#[test]
fn bad_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "ambient_dim = 3\n").unwrap();
    let p = path.to_string_lossy();
    assert_eq!(code(&run(&["classify", "--model", &p, "--point", "1,1"])), 2);
    assert_eq!(code(&run(&["enumerate", "--model", &model("p1_halves.toml"), "--height-bound", "0"])), 2);
}

#[test]
fn enumerate_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let conic = model("p2_conic.toml");
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = run(&[
            "enumerate", "--model", &conic, "--height-bound", "60", "--threads", threads,
            "--out", &out.to_string_lossy(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["counting.csv", "counting.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let meta: Value = serde_json::from_slice(&fs::read(a.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "enumerate");
    let csv = fs::read_to_string(a.join("counting.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn weight_one_counts_everything() {
    let halves = model("p1_halves.toml");
    let o = run(&["enumerate", "--model", &halves, "--height-bound", "100", "--eps", "1,1", "--json"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    let last = v["buckets"].as_array().unwrap().last().unwrap()["cumulative"].clone();
    assert_eq!(last["campana"], last["total"]);
    assert!(last["total"].as_u64().unwrap() > 0);
}

#[test]
fn include_boundary_adds_boundary_points() {
    let halves = model("p1_halves.toml");
    let total = |extra: &[&str]| {
        let mut args = vec!["enumerate", "--model", &halves, "--height-bound", "50", "--json"];
        args.extend_from_slice(extra);
        let v = stdout_json(&run(&args));
        v["buckets"].as_array().unwrap().last().unwrap()["cumulative"]["on_boundary"].as_u64().unwrap()
    };
    assert_eq!(total(&[]), 0);
    assert_eq!(total(&["--include-boundary"]), 2);
}

#[test]
fn vojta_gap_and_verify() {
    let halves = model("p1_halves.toml");
    let o = run(&["vojta-gap", "--model", &halves, "--height-bound", "200", "--delta", "1/10", "--json"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["lemma_violations"], 0);
    assert!(!v["rows"].as_array().unwrap().is_empty());
    assert_eq!(code(&run(&["vojta-gap", "--model", &halves, "--height-bound", "10", "--delta", "0.1"])), 2);

    let o = run(&["verify", "--model", &halves, "--height-bound", "300", "--json"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["oracle"], "squarefull");
    assert!(v["disagreements"].as_array().unwrap().is_empty());

    let o = run(&["verify", "--model", &halves, "--height-bound", "50", "--oracle", "s-unit"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn census_local_and_offline_remote() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/curves.csv");
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "census", "--input", &fixture.to_string_lossy(), "--set-s", "2,3", "--json",
        "--out", &dir.path().to_string_lossy(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["records"].as_u64().unwrap() >= 1000);
    assert_eq!(v["skipped"], 0);
    assert!(dir.path().join("records.csv").exists());

    let config = dir.path().join("remote.toml");
    fs::write(
        &config,
        "endpoint = \"http://127.0.0.1:9/?o={offset}&l={limit}\"\nmax_retries = 1\nbackoff_ms = 1\nmin_interval_ms = 0\ntimeout_secs = 2\n",
    )
    .unwrap();
    let cache = dir.path().join("empty-cache");
    let o = run(&[
        "census", "--remote", "--remote-config", &config.to_string_lossy(),
        "--cache-dir", &cache.to_string_lossy(), "--limit", "10",
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
