use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pinchlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinchlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn header(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn csv_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 6] = [
        (
            &["inequality", "check", "--profile", "constant", "--h-grid", "1"],
            "profile_id,N,h,lhs,rhs,gap,ratio,method,resolution",
        ),
        (
            &["riccati", "lambda-curve", "--a-grid", "0.5,1"],
            "a,Lambda,Lambda_over_a,residual,energy_identity_error",
        ),
        (
            &["matrix", "demo", "--constant-diag", "1,0.25", "--steps", "512"],
            "a,int_lambda_minus,int_lambda_plus,bunching_ratio,one_over_a,lyap_minus,lyap_plus,residual",
        ),
        (
            &["ghk", "--a1", "50", "--eps", "0.05"],
            "a1,a2,eps,t0,t1,pointwise_ratio_at_t,two_eps_sq,avg_ratio,a1_over_a2",
        ),
        (&["pinching"], "eps,alpha,r0,a1,a2,ratio,method,deviation"),
        (
            &["riccati", "dnu", "--h-grid", "1"],
            "h,mu_integral,nu_integral,finite_difference,relative_error,pass",
        ),
    ];
    for (args, expected) in cases {
        let out = pinchlab(dir.path(), args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(header(&out), expected, "{args:?}");
    }
}

#[test]
fn json_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = pinchlab(
        dir.path(),
        &["ghk", "--eps", "0.05,0.1", "--format", "json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "ghk");
    assert_eq!(v["pass"], true);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["seed"], 0);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["inequality", "check", "--profile", "wave:1"][..],
        &["inequality", "check", "--profile", "constant:-1"],
        &["inequality", "check", "--h-grid", "log:0:1:3"],
        &[
            "riccati",
            "dnu",
            "--forcing",
            r#"{"kind":"step","values":[1]}"#,
        ],
        &["pinching", "--alpha", "1.5"],
        &["ghk", "--eps", "2"],
        &["matrix", "demo", "--rotating", "1,2,3"],
        &["--replay", "missing.json"],
        &["no-such-command"],
        &[],
    ] {
        let out = pinchlab(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn failure_writes_counterexample_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.csv");
    let args = [
        "pinching",
        "--sweep-eps",
        "1e-2,1e-3",
        "--r0",
        "0.5",
        "--tol",
        "1e-3",
        "--out",
        report.to_str().unwrap(),
    ];
    let out = pinchlab(dir.path(), &args);
    assert_eq!(out.status.code(), Some(1));
    let cx_path = dir.path().join("report.csv.counterexample.json");
    let cx: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cx_path).unwrap()).unwrap();
    assert_eq!(cx["counterexample"]["kind"], "pinching");
    assert_eq!(cx["counterexample"]["r0"], 0.5);
    let first = fs::read(&report).unwrap();

    let replayed = dir.path().join("replayed.csv");
    let out = pinchlab(
        dir.path(),
        &[
            "--replay",
            cx_path.to_str().unwrap(),
            "--out",
            replayed.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(fs::read(&replayed).unwrap(), first);
}

#[test]
fn passing_replay_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cx = dir.path().join("cx.json");
    fs::write(
        &cx,
        r#"{"schema_version":1,"counterexample":{"kind":"inequality","profile":{"kind":"constant","value":1.0},"h":[0.1,1.0],"method":"auto","tol":1e-9}}"#,
    )
    .unwrap();
    let out = pinchlab(dir.path(), &["--replay", cx.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "inequality",
        "fuzz",
        "--count",
        "30",
        "--seed",
        "5",
        "--h-grid",
        "log:0.1:10:5",
    ];
    let a = pinchlab(dir.path(), &args);
    let b = pinchlab(dir.path(), &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let other = pinchlab(
        dir.path(),
        &[
            "inequality",
            "fuzz",
            "--count",
            "30",
            "--seed",
            "6",
            "--h-grid",
            "log:0.1:10:5",
        ],
    );
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn dump_grid_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = pinchlab(
        dir.path(),
        &["pinching", "--dump-grid", path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("r,w,exact,leading"));
    assert!(text.lines().count() > 100);
}
