//! End-to-end checks of the command-line interface: byte-stable outputs,
//! frozen goldens, and diagnostics that name their inputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slicetrack"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(!out.status.success(), "command {args:?} unexpectedly passed");
    out
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hybrid_tracking_reproduces_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.txt");
    run_ok(&[
        "track",
        "--input",
        path_arg(&fixture("hybrid_input.txt")),
        "--output",
        path_arg(&out_path),
        "--mode",
        "hybrid",
    ]);
    let got = std::fs::read(&out_path).unwrap();
    let want = std::fs::read(fixture("hybrid_golden.txt")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn tracking_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for (out, mode) in [(&a, "bidirectional"), (&b, "bidirectional")] {
        run_ok(&[
            "track",
            "--input",
            path_arg(&fixture("hybrid_input.txt")),
            "--output",
            path_arg(out),
            "--mode",
            mode,
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn eval_prints_the_frozen_table_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("report.json");
    let out = run_ok(&[
        "eval",
        "--input",
        path_arg(&fixture("hybrid_golden.txt")),
        "--truth",
        path_arg(&fixture("truth.txt")),
        "--output",
        path_arg(&json_path),
    ]);
    let want = "\
study                    tp     fp     fn  precision   recall       f1
s01                       2      1      0     0.6667   1.0000   0.8000
corpus                    2      1      0     0.6667   1.0000   0.8000
";
    assert_eq!(String::from_utf8(out.stdout).unwrap(), want);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report["corpus"]["tp"], 2);
    assert_eq!(report["corpus"]["fp"], 1);
    assert_eq!(report["corpus"]["fn"], 0);
    assert_eq!(report["corpus"]["recall"], 1.0);
    assert_eq!(report["studies"][0]["scope"], "s01");
}

#[test]
fn tune_writes_the_same_table_it_prints() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("tune.tsv");
    let out = run_ok(&[
        "tune",
        "--input",
        path_arg(&fixture("hybrid_input.txt")),
        "--truth",
        path_arg(&fixture("truth.txt")),
        "--output",
        path_arg(&table_path),
        "--jobs",
        "2",
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, std::fs::read_to_string(&table_path).unwrap());
    assert!(stdout.starts_with("confidence\tprecision\trecall\tf1\tbest\n"));
    assert_eq!(stdout.lines().count(), 10);
    assert_eq!(stdout.matches("\ttrue").count(), 1);
}

#[test]
fn synth_outputs_parse_and_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        [
            "synth".to_string(),
            "--output".into(),
            d.join("dets.txt").to_str().unwrap().into(),
            "--truth".into(),
            d.join("truth.txt").to_str().unwrap().into(),
            "--studies".into(),
            "2".into(),
            "--slices".into(),
            "8".into(),
            "--seed".into(),
            "41".into(),
        ]
    };
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    std::fs::create_dir_all(&first).unwrap();
    std::fs::create_dir_all(&second).unwrap();
    for d in [&first, &second] {
        let out = bin().args(args(d)).output().unwrap();
        assert!(out.status.success());
    }
    for name in ["dets.txt", "truth.txt"] {
        assert_eq!(
            std::fs::read(first.join(name)).unwrap(),
            std::fs::read(second.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    // A detections file evaluates against its own truth without errors.
    run_ok(&[
        "eval",
        "--input",
        first.join("dets.txt").to_str().unwrap(),
        "--truth",
        first.join("truth.txt").to_str().unwrap(),
    ]);
}

#[test]
fn missing_input_names_the_path() {
    let out = run_err(&[
        "track",
        "--input",
        "/nonexistent/dets.txt",
        "--output",
        "/tmp/never-written.txt",
    ]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("/nonexistent/dets.txt"), "stderr was: {stderr}");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_defects_name_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "# fine\ns01 2 0 1,2,3,4,0.5\ns01 2 9 1,2,3,4,0.5\n").unwrap();
    let out = run_err(&[
        "track",
        "--input",
        path_arg(&bad),
        "--output",
        path_arg(&dir.path().join("out.txt")),
    ]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("bad.txt"), "stderr was: {stderr}");
    assert!(stderr.contains("line 3"), "stderr was: {stderr}");
}

#[test]
fn out_of_range_parameters_fail_before_any_reads() {
    let out = run_err(&[
        "track",
        "--input",
        "/nonexistent/never-read.txt",
        "--output",
        "/tmp/never-written-2.txt",
        "--track-activation",
        "1.5",
    ]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("track_activation"), "stderr was: {stderr}");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = run_err(&["track", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}
