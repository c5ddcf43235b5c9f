use std::path::Path;
use std::process::{Command, Output};

fn gasket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasket")).args(args).output().unwrap()
}

fn out_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn measure_writes_table_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nu.csv");
    let o = gasket(&["measure", "--kind", "nu", "--level", "2", "--out", out_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.lines().any(|l| l.starts_with("11,41,225,")));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("nu.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["subcommand"], "measure");
    assert!(meta["config_hash"].as_str().unwrap().len() == 64);
    assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn json_output_parses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let o = gasket(&["--format", "json", "graph", "--level", "1", "--out", out_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = gasket(&["walk", "--level", "3", "--paths", "500", "--horizon", "0.3", "--seed", seed, "--out", out_arg(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv", "9"), run("b.csv", "9"));
    assert_ne!(run("a.csv", "9"), run("c.csv", "10"));
}

#[test]
fn empty_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{}").unwrap();
    let o = gasket(&["run", "--config", out_arg(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("subcommand"));
}

#[test]
fn unknown_config_field_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"subcommand": "graph", "level": 1, "levle": 2}"#).unwrap();
    let o = gasket(&["run", "--config", out_arg(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("levle"));
}

#[test]
fn schema_is_json() {
    let o = gasket(&["schema", "--of", "problem"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
}
