//! End-to-end tests of the `impspps` binary: artifact shapes, exit codes,
//! and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn impspps(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impspps"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Parses a CSV produced by the binary into a header and float rows.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn formal_powers_unit_columns_are_monomials() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "unit", "interval": [-1.0, 1.0], "grid_n": 201, "order": 5}"#,
    );
    let out = impspps(&["formal-powers", "--config", &config, "--out", "art"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_csv(&dir.path().join("art/formal_powers.csv"));
    let col = header.iter().position(|h| h == "phi_a_3").unwrap();
    for row in &rows {
        assert!((row[col] - row[0].powi(3)).abs() <= 1e-10);
    }
    let report = read_json(&dir.path().join("art/formal_residuals.json"));
    assert!(report["max_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn invalid_impedance_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x,a\n-1.0,1.0\n0.0,-0.5\n1.0,1.0\n").unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "file:bad.csv", "interval": [-0.5, 0.5], "grid_n": 101}"#,
    );
    let out = impspps(&["formal-powers", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eigen_unit_spectrum_is_integer_squares() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "unit", "interval": [0.0, 3.141592653589793], "grid_n": 801, "n_max": 3}"#,
    );
    let out = impspps(&["eigen", "--config", &config, "--out", "art"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (_, rows) = read_csv(&dir.path().join("art/eigenvalues.csv"));
    for (row, expected) in rows.iter().zip([1.0, 4.0, 9.0]) {
        assert!((row[1] - expected).abs() <= 1e-8, "{} vs {expected}", row[1]);
    }
    assert!(dir.path().join("art/eigenfunction_02.csv").exists());
    let report = read_json(&dir.path().join("art/eigen_report.json"));
    assert!(report["orthonormality_deviation"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn eigen_scan_shortfall_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "unit", "interval": [0.0, 3.141592653589793], "grid_n": 401,
            "n_max": 5, "lambda_max": 5.0}"#,
    );
    let out = impspps(&["eigen", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_matches_reference_solution() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "affine", "interval": [-0.8, 0.8], "grid_n": 801,
            "kind": "c", "rho": 3.141592653589793}"#,
    );
    let out = impspps(&["solve", "--config", &config, "--out", "art"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = read_json(&dir.path().join("art/solve_report.json"));
    assert!(report["sup_error"].as_f64().unwrap() <= 1e-8);
    let (header, rows) = read_csv(&dir.path().join("art/solution.csv"));
    assert_eq!(header, ["x", "re_u", "im_u", "re_ref", "im_ref"]);
    assert_eq!(rows.len(), 801);
}

#[test]
fn solve_with_terms_beyond_table_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "affine", "interval": [-0.5, 0.5], "grid_n": 201,
            "kind": "c", "rho": 3.0, "order": 8, "terms": 50}"#,
    );
    let out = impspps(&["solve", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn approx_errors_shrink_with_order() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "affine", "interval": [-0.5, 0.5], "grid_n": 401,
            "targets": ["exp"], "orders": [3, 7, 11]}"#,
    );
    let out = impspps(&["approx", "--config", &config, "--out", "art"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = read_json(&dir.path().join("art/projection_exp.json"));
    let errors: Vec<f64> = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["error_l2a"].as_f64().unwrap())
        .collect();
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
}

#[test]
fn approx_order_beyond_table_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "affine", "interval": [-0.5, 0.5], "grid_n": 201,
            "orders": [3, 20], "order": 10}"#,
    );
    let out = impspps(&["approx", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn kernel_for_unit_impedance_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "unit", "interval": [-0.5, 0.5], "grid_n": 101, "j_modes": 16}"#,
    );
    let out = impspps(&["kernel", "--config", &config, "--out", "art"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_csv(&dir.path().join("art/kernel.csv"));
    assert_eq!(header, ["x", "t", "re_k", "im_k"]);
    for row in &rows {
        assert!(row[2].abs() <= 1e-10 && row[3] == 0.0);
    }
    let report = read_json(&dir.path().join("art/kernel_report.json"));
    assert!(report["relations"]["path_integral_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn kernel_needs_symmetric_interval() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "affine", "interval": [-0.5, 0.8], "grid_n": 201}"#,
    );
    let out = impspps(&["kernel", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn check_affine_verdict_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "affine", "interval": [-0.8, 0.8], "grid_n": 801}"#,
    );
    let out = impspps(&["check", "--config", &config, "--out", "art"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = read_json(&dir.path().join("art/check_report.json"));
    assert_eq!(report["verdict"], "pass");
    let suites = report["suites"].as_array().unwrap();
    assert!(suites.iter().any(|s| s["name"] == "inverse_round_trip"));
    assert!(suites.iter().all(|s| s["pass"] == true));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "exp:1", "interval": [-0.5, 0.5], "grid_n": 201, "order": 6}"#,
    );
    for out_dir in ["one", "two"] {
        let out = impspps(
            &["formal-powers", "--config", &config, "--out", out_dir],
            dir.path(),
        );
        assert!(out.status.success());
    }
    for name in ["formal_powers.csv", "formal_residuals.json"] {
        let a = std::fs::read(dir.path().join("one").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("two").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"impedance": "unit", "interval": [-0.5, 0.5], "grid_n": 801, "order": 4}"#,
    );
    let out = impspps(
        &[
            "formal-powers",
            "--config",
            &config,
            "--out",
            "art",
            "--impedance",
            "exp:1",
            "--grid-n",
            "101",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("art/formal_residuals.json"));
    assert_eq!(report["impedance"], "exp:1");
    assert_eq!(report["grid_n"], 101);
}
