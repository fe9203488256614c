use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hilbertnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hilbertnet"))
        .args(args)
        .env_remove("HILBERTNET_OUT")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn map_dump_has_one_line_per_site() {
    let out = hilbertnet(&["map", "--n", "8"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 64);
    assert_eq!(text.lines().next(), Some("0 0 0"));
    assert_eq!(text.lines().last(), Some("63 7 0"));
    assert_eq!(hilbertnet(&["map", "--n", "8"]).stdout, text.as_bytes());
}

#[test]
fn ed_reports_the_classical_plaquette() {
    let v = stdout_json(&hilbertnet(&["ed", "--n", "2", "--lambda", "0", "--mapping", "snake"]));
    for key in ["n", "lambda", "boundary", "mapping", "energy", "energy_density", "residual"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!((v["energy"].as_f64().unwrap() + 4.0).abs() < 1e-9);
    assert_eq!(v["mapping"], "snake");
}

#[test]
fn solvers_agree_with_exact_on_a_plaquette() {
    let exact = stdout_json(&hilbertnet(&["ed", "--n", "2", "--lambda", "1.5"]))["energy_density"]
        .as_f64()
        .unwrap();
    for cmd in ["dmrg", "ttn"] {
        let v = stdout_json(&hilbertnet(&[cmd, "--n", "2", "--lambda", "1.5", "--m", "4"]));
        assert!((v["energy_density"].as_f64().unwrap() - exact).abs() < 1e-9, "{cmd}");
        assert_eq!(v["converged"], true);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(hilbertnet(&["ed", "--n", "3"]).status.code(), Some(1));
    assert_eq!(hilbertnet(&["ed", "--boundary", "sideways"]).status.code(), Some(1));
    assert_eq!(hilbertnet(&["nonsense"]).status.code(), Some(1));
    assert_eq!(hilbertnet(&["dmrg", "--m", "4,8"]).status.code(), Some(1));
    assert_eq!(hilbertnet(&["experiment", "--kind", "nope"]).status.code(), Some(1));
    assert_eq!(hilbertnet(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // The 64-site point is too large for exact diagonalization.
    let partial = hilbertnet(&["experiment", "--kind", "ed_reference", "--n", "2,8", "--out", out]);
    assert_eq!(partial.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&fs::read(dir.path().join("results.json")).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 1);
    assert_eq!(report["failures"].as_array().unwrap().len(), 1);
}

fn run_experiment(dir: &Path, extra: &[&str]) -> Vec<u8> {
    let out = dir.to_str().unwrap();
    let mut args = vec!["experiment", "--kind", "energy_vs_m", "--n", "2", "--lambda", "1,3", "--m", "2,4"];
    args.extend_from_slice(&["--engine", "mps,ttn", "--mapping", "hilbert,snake", "--out", out]);
    args.extend_from_slice(extra);
    let status = hilbertnet(&args).status;
    assert!(status.success());
    fs::read(dir.join("results.json")).unwrap()
}

#[test]
fn experiments_are_reproducible_across_runs_and_workers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_experiment(a.path(), &["--workers", "1"]);
    let second = run_experiment(b.path(), &["--workers", "3"]);
    let strip = |bytes: &[u8]| String::from_utf8(bytes.to_vec()).unwrap();
    assert_eq!(strip(&first), strip(&second));
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 2 * 2 * 2 * 2);
    for file in report["files"].as_array().unwrap() {
        assert!(a.path().join(file.as_str().unwrap()).exists(), "{file}");
    }
    assert!(a.path().join("fig3_energy_vs_m_n2.csv").exists());
    assert!(a.path().join("fig4_energy_vs_m_n2.csv").exists());
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("spec.json");
    fs::write(&config, r#"{"kind": "map_dump", "n": 4, "mapping": ["snake"]}"#).unwrap();
    let out = dir.path().join("run");
    let status = hilbertnet(&[
        "experiment",
        "--n",
        "8",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .status;
    assert!(status.success());
    let text = fs::read_to_string(out.join("fig1_mapping_snake_n4.txt")).unwrap();
    assert_eq!(text.lines().count(), 16);
    assert!(!out.join("fig1_mapping_hilbert_n8.txt").exists());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_hilbertnet"))
        .args(["dmrg", "--n", "2", "--m", "2"])
        .env("HILBERTNET_OUT", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let result: Value = serde_json::from_slice(&fs::read(dir.path().join("mps.json")).unwrap()).unwrap();
    let trace = result["trace_file"].as_str().unwrap();
    let trace: Value = serde_json::from_slice(&fs::read(dir.path().join(trace)).unwrap()).unwrap();
    assert!(!trace["energies"].as_array().unwrap().is_empty());
}

#[test]
fn checkpointed_run_resumes_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["ttn", "--n", "2", "--lambda", "2", "--m", "2", "--checkpoint", "--out", out];
    let first = stdout_json(&hilbertnet(&args));
    assert!(dir.path().join("checkpoints").read_dir().unwrap().count() == 1);
    let again = stdout_json(&hilbertnet(&args));
    assert_eq!(first, again);
}

#[test]
fn distance_statistics() {
    let v = stdout_json(&hilbertnet(&["dist", "--n", "4", "--mapping", "snake"]));
    let chain = &v["distances"][0];
    assert_eq!(chain["geometry"], "chain");
    assert_eq!(chain["max"], 7);
    let tree = &v["distances"][1];
    assert_eq!(tree["geometry"], "tree");
    assert!(tree["mean"].as_f64().unwrap() > 0.0);
}
