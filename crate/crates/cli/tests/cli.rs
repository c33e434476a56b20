use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shopsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shopsim")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_run_and_tabulate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&shopsim(&["gen-catalog", "--items", "2000", "--seed", "0", "--out", "catalog.jsonl"], dir));
    ok(&shopsim(&["gen-ratings", "--catalog", "catalog.jsonl", "--out", "ratings.json"], dir));
    let text = ok(&shopsim(&["gen-suite", "--catalog", "catalog.jsonl", "--seed", "0", "--out", "suite.json"], dir));
    assert!(text.starts_with("10 users, suite hash "));

    fs::write(
        dir.join("oracle.json"),
        r#"{"catalog": "catalog.jsonl", "ratings": "ratings.json", "suite": "suite.json",
            "policy": {"kind": "oracle"}, "out": "runs/none"}"#,
    )
    .unwrap();
    let line = ok(&shopsim(&["run", "--config", "oracle.json"], dir));
    assert!(line.contains("reward 100.0 sr 100.0"), "{line}");
    for a in ["hi", "ed"] {
        let out = format!("runs/{a}");
        ok(&shopsim(&["run", "--config", "oracle.json", "--ablate", a, "--out", &out], dir));
    }

    let gaps = ok(&shopsim(&["gaps", "--full", "runs/none", "--hi", "runs/hi", "--ed", "runs/ed"], dir));
    let g: serde_json::Value = serde_json::from_str(&gaps).unwrap();
    assert_eq!(g["g_hi"], 0.0);
    assert_eq!(g["g_ed"], 0.0);

    let table = ok(&shopsim(&["table", "--in", "runs/none", "runs/hi", "runs/ed", "--csv", "table.csv"], dir));
    assert!(table.contains("oracle"));
    let csv = fs::read_to_string(dir.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = shopsim(&["run", "--config", "missing.json"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    fs::write(tmp.path().join("c.json"), r#"{"catalog": "x", "ratings": "y", "policy": {"kind": "random"}}"#).unwrap();
    let out = shopsim(&["run", "--config", "c.json", "--ablate", "both"], tmp.path());
    assert!(!out.status.success());
}
