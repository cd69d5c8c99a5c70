use std::process::{Command, Output};

use serde_json::Value;
use waist_cli::data_rows;

fn waist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waist")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn direct_tube_query_prints_sin_t() {
    let o = waist(&["tube", "--ambient", "sphere", "--n", "2", "--k", "1", "--tmax", "1.57", "--count", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "t,fraction"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 9);
    for row in rows {
        let (t, v) = row.split_once(',').unwrap();
        let (t, v): (f64, f64) = (t.parse().unwrap(), v.parse().unwrap());
        assert!((v - t.sin()).abs() < 1e-10, "{row}");
    }
}

#[test]
fn delta_sphere_preset_prints_a_json_verdict() {
    let o = waist(&["counterexample", "--preset", "delta-sphere"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["summary"]["verdict"], "violated");
    let w = &v["summary"]["witnesses"][0];
    assert_eq!(w["y"][0], 0.0);
    assert_eq!(w["t"], 0.5);
    assert!((w["shortfall"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-9);
    assert_eq!(v["meta"]["seed"], 1);
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let o = waist(&["waist", "--config", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let extra = dir.path().join("extra.json");
    std::fs::write(&extra, "{\"experiment\": {\"kind\": \"logdet\", \"dim\": 3,\n \"instances\": 2, \"size\": 1}}").unwrap();
    let o = waist(&["transport", "--config", extra.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("size") && err.contains("line 2"), "{err}");

    // a pancake preset is not a waist experiment
    assert_eq!(waist(&["waist", "--preset", "disk-partition"]).status.code(), Some(1));
    assert_eq!(waist(&["waist", "--preset", "no-such-preset"]).status.code(), Some(1));
    assert_eq!(waist(&["demo"]).status.code(), Some(1));
    assert_eq!(waist(&["tube", "--ambient", "cp", "--n", "2", "--k", "2", "--tmax", "1"]).status.code(), Some(1));
    assert_eq!(waist(&["tube", "--bogus"]).status.code(), Some(1));
}

#[test]
fn config_files_write_artifacts_that_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(
        &config,
        r#"{
  "experiment": {"kind": "waist", "measure": {"dim": 2, "kind": "gaussian_aniso", "scales": [0.5, 0.5]},
                 "map": {"name": "sine_shear", "amp": 0.3}, "y": [0.1]},
  "t_grid": {"min": 0.1, "max": 0.9, "count": 3},
  "samples": 20000,
  "seed": 5
}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let cfg = config.to_str().unwrap();
    assert_eq!(waist(&["waist", "--config", cfg, "--out", a.to_str().unwrap(), "--threads", "1"]).status.code(), Some(0));
    assert_eq!(waist(&["waist", "--config", cfg, "--out", b.to_str().unwrap(), "--threads", "2"]).status.code(), Some(0));
    let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    // only the recorded output path differs
    assert_eq!(data_rows(&ta), data_rows(&tb));
    let hash = |t: &str| t.lines().find(|l| l.starts_with("# config_sha256")).map(str::to_string);
    assert_eq!(hash(&ta), hash(&tb));
    assert!(ta.lines().any(|l| l == "t,lhs,lhs_stderr,rhs,margin"));
    assert_eq!(data_rows(&ta).len(), 3);
    assert!(ta.contains("# seed: 5"));

    // the seed flag overrides the file and changes the hash and the rows
    let o = waist(&["waist", "--config", cfg, "--seed", "6"]);
    let other = stdout(&o);
    assert!(other.contains("# seed: 6"));
    assert_ne!(data_rows(&other), data_rows(&ta));
    assert_ne!(hash(&other), hash(&ta));

    // json output of the same run carries the same numbers
    let o = waist(&["waist", "--config", cfg, "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let first: Vec<String> = v["rows"][0].as_array().unwrap().iter().map(|c| c.to_string()).collect();
    assert_eq!(first.join(","), data_rows(&ta)[0]);
}

#[test]
fn presets_are_listed() {
    let o = waist(&["presets"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["delta-sphere", "gaussian-demo", "conic", "subset-domination"] {
        assert!(text.contains(name), "{name}");
    }
}
