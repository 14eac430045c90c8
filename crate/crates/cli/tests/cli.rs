//! The `sccopt` binary run end to end on small networks.

use std::path::Path;
use std::process::{Command, Output};

use sccopt_core::fixtures;

const TWO_NODE: &str = "\
[JUNCTIONS]
J1  0    5
[RESERVOIRS]
R1  50
[PIPES]
P1  R1  J1  1000  300  130  0  Open
[OPTIONS]
Units LPS
[END]
";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sccopt")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_grid(dir: &Path) -> std::path::PathBuf {
    let file = dir.join("grid.json");
    std::fs::write(&file, fixtures::grid(3, 3).to_json()).unwrap();
    file
}

#[test]
fn stats_reports_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let inp = dir.path().join("two.inp");
    std::fs::write(&inp, TWO_NODE).unwrap();
    let out = run(&["stats", path(&inp)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["stats"]["n_links"], 1);
    assert_eq!(v["stats"]["continuous"], 5);
    assert_eq!(v["forest_links"], 1);
}

#[test]
fn simulate_writes_the_velocity_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_grid(dir.path());
    let out_dir = dir.path().join("sim");
    let out = run(&["simulate", path(&net), "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cdf = std::fs::read_to_string(out_dir.join("velocity_cdf.csv")).unwrap();
    assert!(cdf.starts_with("link_id,max_velocity_mps,cum_length_fraction\n"));
    assert!(out_dir.join("solution.json").exists());
}

#[test]
fn design_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "network = \"grid.json\"\nout = \"results\"\nn_v = 1\n\n[sampling]\nn = 4\nm = 2\n",
    )
    .unwrap();
    let out = run(&["design", path(&cfg), "--nf", "1", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("results");
    for f in [
        "solution.json",
        "velocity_cdf.csv",
        "candidates.csv",
        "obbt_report.json",
    ] {
        assert!(results.join(f).exists(), "{f}");
    }
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(results.join("solution.json")).unwrap()).unwrap();
    assert_eq!(
        (sol["n_v"].as_u64(), sol["n_f"].as_u64(), sol["seed"].as_u64()),
        (Some(1), Some(1), Some(5))
    );

    let plain = dir.path().join("plain");
    let out = run(&["design", path(&cfg), "--nf", "1", "--no-obbt", "--out", path(&plain)]);
    assert!(out.status.success());
    assert!(!plain.join("obbt_report.json").exists());
}

#[test]
fn control_and_obbt_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("prv.json");
    std::fs::write(&net, fixtures::prv_loop().to_json()).unwrap();
    let out = run(&["control", path(&net), "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["scc_smooth"].as_f64().unwrap() >= v["uncontrolled"].as_f64().unwrap() - 1e-9);

    let out = run(&["obbt", path(&net), "--nf", "1", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("obbt_report.json").exists());
}

#[test]
fn profile_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("results.csv");
    std::fs::write(&table, "experiment,a,b\nx,10,12\n").unwrap();
    let out = run(&["profile", path(&table), "--out", path(dir.path())]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(csv, "tau,a,b\n1,1,0\n1.2,1,1\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["design"]).status.code(), Some(2));
    assert_eq!(
        run(&["stats", path(&dir.path().join("missing.inp"))]).status.code(),
        Some(2)
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "network = \"x.inp\"\nunknown_key = 1\n").unwrap();
    assert_eq!(run(&["design", path(&bad)]).status.code(), Some(2));

    let inp = dir.path().join("two.inp");
    std::fs::write(&inp, TWO_NODE).unwrap();
    assert_eq!(run(&["design", path(&inp), "--nv", "3"]).status.code(), Some(2));

    let strict = dir.path().join("strict.toml");
    std::fs::write(&strict, "network = \"two.inp\"\n\n[bounds]\np_min = 1000.0\n").unwrap();
    assert_eq!(run(&["control", path(&strict)]).status.code(), Some(3));
    assert_eq!(run(&["design", path(&strict), "--nf", "1"]).status.code(), Some(3));
}
