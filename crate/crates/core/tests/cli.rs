use std::process::Command;

use heol::cli::{cli_main, EXIT_INVALID, EXIT_RUNTIME, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("heol").chain(args.iter().copied());
    let code = cli_main(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn list_includes_builtins() {
    let (code, out, _) = run(&["list"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l.starts_with("paper-sec4\t")));
    assert!(out.lines().any(|l| l.starts_with("paper-sec4-nominal\t")));
}

#[test]
fn run_writes_csv_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let (code, out, err) = run(&["run", "--config", "paper-sec4", "--out", out_dir]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("tracking ok"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("paper-sec4.csv")).unwrap();
    assert_eq!(csv.lines().count(), 15002);
    let metrics = std::fs::read_to_string(dir.path().join("paper-sec4.metrics.txt")).unwrap();
    assert!(metrics.contains("tracking_ok_y2 = true"));
}

#[test]
fn concurrent_runs_match_sequential_ones() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&[
        "run",
        "--config",
        "paper-sec4",
        "--config",
        "ultra-local",
        "--out",
        a.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&["run", "--config", "ultra-local", "--out", b.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(
        std::fs::read(a.path().join("ultra-local.csv")).unwrap(),
        std::fs::read(b.path().join("ultra-local.csv")).unwrap()
    );
}

#[test]
fn validate_reports_p_ne_m() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = heol::scenarios::builtin("paper-sec4").unwrap();
    s.references.pop();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, s.to_json()).unwrap();
    let (code, _, err) = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("p = m"), "{err}");

    let (code, out, _) = run(&["validate", "--config", "paper-sec4"]);
    assert_eq!(code, 0);
    assert!(out.contains("ok"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run(&["run", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(run(&[]).0, EXIT_USAGE);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&[
        "run",
        "--config",
        "paper-sec4-nominal",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_RUNTIME);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("t = "), "{err}");
    assert!(dir.path().join("paper-sec4-nominal.partial.csv").exists());
    assert!(!dir.path().join("paper-sec4-nominal.csv").exists());
}

#[test]
fn binary_reads_out_dir_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_heol"))
        .args(["run", "--config", "ultra-local"])
        .env("HEOL_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(dir.path().join("ultra-local.metrics.txt").exists());
}

#[test]
fn documented_example_matches_builtin() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/paper-sec4.json");
    let text = std::fs::read_to_string(path).unwrap();
    let parsed = heol::scenarios::Scenario::from_json(&text).unwrap();
    assert_eq!(parsed, heol::scenarios::builtin("paper-sec4").unwrap());
}
