mod common;

use std::fs;

use common::{differing, evlearn, run, run_pipeline};

#[test]
fn every_subcommand_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_pipeline(a.path(), 11).unwrap();
    let rb = run_pipeline(b.path(), 11).unwrap();
    assert!(ra.len() >= 18, "only {} files", ra.len());
    let bad = differing(&ra, &rb);
    assert!(bad.is_empty(), "outputs differ: {bad:?}");
}

#[test]
fn seed_changes_simulated_output() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ["generator=logistic", "n=50", "d=2", "a=0.5"];
    assert!(run(dir.path(), "simulate", "a.csv", &sets, 1)
        .status
        .success());
    assert!(run(dir.path(), "simulate", "b.csv", &sets, 2)
        .status
        .success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "simulate",
        "x.csv",
        &["generator=logistic", "bogus=1"],
        0,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));

    let o = run(
        dir.path(),
        "bounds",
        "b.csv",
        &["requests=k-tilde", "delta=1"],
        0,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));

    let o = run(
        dir.path(),
        "simulate",
        "x.csv",
        &["generator=logistic", "n=10", "d=2", "a=1.5"],
        0,
    );
    assert_ne!(o.status.code(), Some(0));

    let o = evlearn(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.conf");
    fs::write(
        &cfg,
        "# draw\ngenerator = logistic\nn = 30\nd = 2\na = 0.7\n",
    )
    .unwrap();
    let out = dir.path().join("s.csv");
    let o = evlearn(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "n=12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(!text.contains('\r'));
}

#[test]
fn ragged_csv_is_rejected_with_row_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "a,b\n1,2\n3,4\n5\n").unwrap();
    let o = run(
        dir.path(),
        "standardize",
        "out.csv",
        &[&format!("input={}", input.display())],
        0,
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3"), "{err}");
    assert!(!dir.path().join("out.csv").exists());
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "angular-measure",
        "out.csv",
        &["input=/nonexistent/file.csv", "k=5"],
        0,
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scores_cover_every_input_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |n: &str| d.join(n).display().to_string();
    assert!(run(
        d,
        "simulate",
        "x.csv",
        &["generator=logistic", "n=800", "d=2", "a=0.4"],
        5
    )
    .status
    .success());
    let o = run(
        d,
        "mvset-fit",
        "m.model",
        &[&format!("input={}", p("x.csv")), "k=80", "alpha=0.9", "m=4"],
        5,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        d,
        "score",
        "s.csv",
        &[
            &format!("model={}", p("m.model")),
            &format!("input={}", p("x.csv")),
        ],
        5,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 801);
}

#[test]
fn experiment_writes_summary_companion() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "experiment-sim",
        "e.csv",
        &[
            "n=1500",
            "n_test=3000",
            "d=5",
            "taus=0.05",
            "replications=2",
            "folds=3",
            "lambda_points=5",
        ],
        3,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("e.summary.csv").exists());
}
