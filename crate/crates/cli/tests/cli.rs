use std::path::Path;
use std::process::{Command, Output};

use fidoac_cli::{EXIT_ACCEPTED, EXIT_PROOF_FAILURE, EXIT_USAGE};

fn fidoac(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fidoac"))
        .args(["--profile", "test", "--tau", "16", "--seed", "3"])
        .args(args)
        .args(["--dir", dir.to_str().unwrap()])
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn issue(dir: &Path, id: &str, birth: &str) {
    let out = fidoac(dir, &["issue", "--id", id, "--name", "DOE JANE", "--birth-date", birth]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes_follow_the_flow_outcome() {
    let dir = tempfile::tempdir().unwrap();
    issue(dir.path(), "adult", "891231");
    issue(dir.path(), "minor", "051231");
    assert!(dir.path().join("anchors.kv").exists());

    let out = fidoac(dir.path(), &["run", "--eid", "adult"]);
    assert_eq!(code(&out), EXIT_ACCEPTED, "{}", String::from_utf8_lossy(&out.stdout));
    let out = fidoac(dir.path(), &["run", "--eid", "adult", "--flow", "authenticate"]);
    assert_eq!(code(&out), EXIT_ACCEPTED);

    let out = fidoac(dir.path(), &["--json", "run", "--eid", "minor"]);
    assert_eq!(code(&out), EXIT_PROOF_FAILURE);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["stage"], "prove");
    assert_eq!(report["accepted"], false);

    let out = fidoac(dir.path(), &["run", "--eid", "minor", "--policy", "none"]);
    assert_eq!(code(&out), EXIT_ACCEPTED);
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fidoac(dir.path(), &["run", "--eid", "nobody"])), EXIT_USAGE);
    issue(dir.path(), "adult", "891231");
    assert_eq!(code(&fidoac(dir.path(), &["run", "--eid", "adult", "--policy", "nationality:DEU"])), EXIT_USAGE);
    let out = Command::new(env!("CARGO_BIN_EXE_fidoac"))
        .args(["--profile", "default", "run", "--eid", "adult", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), EXIT_USAGE);
}

#[test]
fn bundled_experiments_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fidoac")).args(["--json", "experiment", "--list"]).output().unwrap();
    let names: Vec<(String, String)> = serde_json::from_slice(&out.stdout).unwrap();
    assert!(names.len() >= 17);
    let script = dir.path().join("s.json");
    let out = Command::new(env!("CARGO_BIN_EXE_fidoac"))
        .args(["experiment", "--builtin", "fake_dso", "--dump"])
        .output()
        .unwrap();
    std::fs::write(&script, &out.stdout).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fidoac"))
        .args(["--json", "--tau", "2", "--seed", "1", "experiment", "--script"])
        .arg(&script)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((v["experiment"].as_str(), v["win"].as_bool()), (Some("att_unf"), Some(false)));
}

#[test]
fn empty_bench_succeeds() {
    let out = Command::new(env!("CARGO_BIN_EXE_fidoac"))
        .args(["--profile", "test", "--json", "bench", "--iterations", "0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["iterations"], 0);
}
