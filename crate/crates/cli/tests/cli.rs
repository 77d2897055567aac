//! End-to-end tests of the binary: exit-code contract, artifact schemas,
//! determinism, and config handling.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn hombif(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hombif"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn exit(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn verify_example_passes_and_reports_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let out = hombif(dir.path(), &["verify-example"]);
    let text = stdout(&out);
    assert_eq!(exit(&out), 0, "{text}");
    assert!(text.contains("w1(E^s(+inf)) = -1"), "{text}");
    assert!(text.contains("w1(E^s(-inf)) = +1"), "{text}");
    assert!(text.contains("parity = -1"), "{text}");
    assert!(text.contains("worked example verified"), "{text}");
}

#[test]
fn detect_constant_system_is_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"system":"constant_hyperbolic"}"#);
    let out = hombif(dir.path(), &["detect", "--config", &cfg, "--out", "art"]);
    let text = stdout(&out);
    assert_eq!(exit(&out), 0, "{text}");
    assert!(text.contains("criterion not met"), "{text}");
    let report = std::fs::read_to_string(dir.path().join("art/report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["criterion_met"], serde_json::Value::Bool(false));
    assert_eq!(json["parity"], serde_json::json!(1));
}

#[test]
fn scan_csv_matches_analytic_crossing_determinant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"system":"paper_example_s7"}"#);
    let out = hombif(
        dir.path(),
        &[
            "scan",
            "--config",
            &cfg,
            "--out",
            "art",
            "--samples",
            "256",
            "--quiet",
        ],
    );
    assert_eq!(exit(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("art/scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("theta,d,sigma_min"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
        let expected = (cols[0] / 2.0).cos();
        assert!(
            (cols[1] - expected).abs() < 1e-8,
            "d({}) = {}, expected {expected}",
            cols[0],
            cols[1]
        );
        assert!(cols[2] >= 0.0);
        rows += 1;
    }
    assert_eq!(rows, 256);
}

#[test]
fn scan_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"system":"paper_example_s7","K":32}"#,
    );
    for sub in ["a", "b"] {
        let out = hombif(
            dir.path(),
            &["scan", "--config", &cfg, "--out", sub, "--quiet"],
        );
        assert_eq!(exit(&out), 0);
    }
    let a = std::fs::read(dir.path().join("a/scan.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/scan.csv")).unwrap();
    assert_eq!(a, b);
    let ra = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let rb = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn dump_config_round_trips_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = hombif(dir.path(), &["dump-config"]);
    assert_eq!(exit(&first), 0);
    let cfg = write_config(dir.path(), "dumped.json", &stdout(&first));
    let second = hombif(dir.path(), &["dump-config", "--config", &cfg]);
    assert_eq!(exit(&second), 0);
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn schema_errors_are_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let k2 = write_config(
        dir.path(),
        "k2.json",
        r#"{"system":"paper_example_s7","K":2}"#,
    );
    assert_eq!(exit(&hombif(dir.path(), &["detect", "--config", &k2])), 4);
    let unknown = write_config(
        dir.path(),
        "u.json",
        r#"{"system":"paper_example_s7","frobnicate":1}"#,
    );
    assert_eq!(
        exit(&hombif(dir.path(), &["detect", "--config", &unknown])),
        4
    );
    assert_eq!(
        exit(&hombif(dir.path(), &["detect", "--config", "missing.json"])),
        4
    );
    let badname = write_config(dir.path(), "n.json", r#"{"system":"not_a_system"}"#);
    assert_eq!(
        exit(&hombif(dir.path(), &["detect", "--config", &badname])),
        4
    );
}

#[test]
fn assumption_failure_is_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // lambda0 = pi sits on the kernel crossing of the worked example: (A4)
    // must fail and the diagnostic must point at the base point.
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"system":"paper_example_s7","lambda0":{PI:.17}}}"#),
    );
    let out = hombif(dir.path(), &["detect", "--config", &cfg]);
    assert_eq!(exit(&out), 2, "{}", stdout(&out));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("A4"), "{err}");
}

#[test]
fn solve_writes_branch_and_orbit_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"system":"paper_example_s7_cubic","truncation":{"n_minus":40,"n_plus":40}}"#,
    );
    let out = hombif(
        dir.path(),
        &[
            "solve",
            "--config",
            &cfg,
            "--out",
            "art",
            "--eps",
            "1e-3,1e-4",
            "--quiet",
        ],
    );
    assert_eq!(exit(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let branch = std::fs::read_to_string(dir.path().join("art/branch.csv")).unwrap();
    let lines: Vec<&str> = branch.lines().collect();
    assert_eq!(lines[0], "eps,lambda,sup_norm,residual");
    assert_eq!(lines.len(), 3);
    for (line, eps) in lines[1..].iter().zip([1e-3, 1e-4]) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols[0], eps);
        assert!((cols[1] - PI).abs() < 0.01, "lambda {}", cols[1]);
        assert!((cols[2] - eps).abs() <= 0.01 * eps, "sup_norm {}", cols[2]);
        assert!(cols[3] < 1e-10, "residual {}", cols[3]);
    }
    let orbit = std::fs::read_to_string(dir.path().join("art/orbit_1e-3.csv")).unwrap();
    let lines: Vec<&str> = orbit.lines().collect();
    assert_eq!(lines[0], "n,x1,x2");
    assert_eq!(lines.len(), 1 + 81);
    assert!(lines[1].starts_with("-40,"));
    let report = std::fs::read_to_string(dir.path().join("art/report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["branches"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_without_criterion_produces_no_branches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"system":"constant_hyperbolic"}"#);
    let out = hombif(dir.path(), &["solve", "--config", &cfg, "--out", "art"]);
    let text = stdout(&out);
    assert_eq!(exit(&out), 0, "{text}");
    assert!(text.contains("criterion not met"), "{text}");
    let branch = std::fs::read_to_string(dir.path().join("art/branch.csv")).unwrap();
    assert_eq!(branch, "eps,lambda,sup_norm,residual\n");
}

#[test]
fn inline_tabulated_system_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let sample = "[[0.5,0.0],[0.0,2.0]]";
    let rows = [sample; 9].join(",");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"system":{{"name":"inline-const","dim":2,"plus":[{rows}],"minus":[{rows}]}},"K":8}}"#
        ),
    );
    let out = hombif(dir.path(), &["detect", "--config", &cfg, "--out", "art"]);
    let text = stdout(&out);
    assert_eq!(
        exit(&out),
        0,
        "{text}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(text.contains("criterion not met"), "{text}");
}

#[test]
fn inline_system_failing_closure_is_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let sample = "[[0.5,0.0],[0.0,2.0]]";
    let mut rows: Vec<String> = vec![sample.to_string(); 8];
    rows.push("[[0.5001,0.0],[0.0,2.0]]".to_string());
    let rows = rows.join(",");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"system":{{"name":"open","dim":2,"plus":[{rows}],"minus":[{rows}]}},"K":8}}"#
        ),
    );
    let out = hombif(dir.path(), &["detect", "--config", &cfg]);
    assert_eq!(exit(&out), 4, "{}", stdout(&out));
    assert!(String::from_utf8_lossy(&out.stderr).contains("close"));
}

#[test]
fn quiet_suppresses_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = hombif(dir.path(), &["verify-example", "--quiet"]);
    assert_eq!(exit(&out), 0);
    assert!(stdout(&out).is_empty());
}
