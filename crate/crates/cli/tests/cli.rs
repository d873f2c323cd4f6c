use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qref(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qref"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr is a JSON error")
}

#[test]
fn usage_error_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qref(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");
}

#[test]
fn missing_config_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qref(&["--config", "absent.toml", "mine"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["kind"], "config");
}

#[test]
fn bad_config_value_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "[eval]\nk = 0\n").unwrap();
    let out = qref(&["--config", "c.toml", "eval"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_input_exits_4_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("dataset.tsv"),
        "<same>\ta b\tc\nbroken line\n",
    )
    .unwrap();
    let out = qref(&["--workdir", ".", "baseline"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    let msg = error_json(&out)["error"]["message"]
        .as_str()
        .unwrap()
        .to_owned();
    assert!(msg.contains(":2:"), "{msg}");
}

#[test]
fn unwritable_output_exits_5() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("real.tsv"), "a b\ta\t<same>\ta\n").unwrap();
    // the output directory is an existing regular file
    let out = qref(
        &["--workdir", ".", "eval", "real.tsv", "--out", "real.tsv"],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(error_json(&out)["error"]["kind"], "io");
}

#[test]
fn refuses_to_overwrite_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = root().join("demo/generator.toml");
    let spec = spec.to_str().unwrap();
    let first = qref(&["--workdir", "w", "gen", "--spec", spec], tmp.path());
    assert!(first.status.success());
    let log = std::fs::read(tmp.path().join("w/log.jsonl")).unwrap();

    let again = qref(
        &["--workdir", "w", "--seed", "9", "gen", "--spec", spec],
        tmp.path(),
    );
    assert_eq!(again.status.code(), Some(4));
    assert_eq!(std::fs::read(tmp.path().join("w/log.jsonl")).unwrap(), log);

    let forced = qref(
        &[
            "--workdir",
            "w",
            "--seed",
            "9",
            "--force",
            "gen",
            "--spec",
            spec,
        ],
        tmp.path(),
    );
    assert!(forced.status.success());
    assert_ne!(std::fs::read(tmp.path().join("w/log.jsonl")).unwrap(), log);
}

#[test]
fn fixture_bucketize_and_identity_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = root().join("fixtures/labelled_pairs");
    let cfg = fixture.join("config.toml");
    let cfg = cfg.to_str().unwrap();
    let pairs = fixture.join("pairs.tsv");
    let run = |args: &[&str]| {
        let mut all = vec!["--config", cfg, "--workdir", "."];
        all.extend_from_slice(args);
        let out = qref(&all, tmp.path());
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };
    run(&["bucketize", "--pairs", pairs.to_str().unwrap()]);
    run(&["export"]);
    let dataset = std::fs::read_to_string(tmp.path().join("dataset.tsv")).unwrap();
    assert_eq!(dataset.lines().count(), 9);
    run(&["baseline", "--kind", "identity"]);
    let out = run(&["eval", "identity=predictions.identity.tsv"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("identity"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report[0]["report"]["cov"], 0.0);
    assert_eq!(report[0]["report"]["rats"], 0.0);
}
