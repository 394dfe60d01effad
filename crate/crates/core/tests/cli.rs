use std::path::Path;
use std::process::{Command, Output};

use wishart_extremes::cli::{curve_from_csv, CurveDocument, ValidationReport, EXIT_NUMERICAL, EXIT_USAGE};
use wishart_extremes::{Extreme, ModelParams};

fn wishart(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wishart"));
    cmd.args(args).env_remove("WISHART_THREADS").env("RUST_LOG", "warn");
    if let Some(t) = threads {
        cmd.env("WISHART_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pdf_csv_has_one_row_per_grid_point() {
    let o = wishart(
        &["pdf", "--which", "largest", "--K", "3", "--M", "8", "--rho", "1", "--grid", "0:30:400", "--format", "csv"],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 401);
    let c = curve_from_csv(&text, Extreme::Largest, ModelParams::new(3, 8, 1.0).unwrap()).unwrap();
    // the grid stops at 30, which leaves P(l_1 > 30) = 0.00417 outside
    assert!((c.cdf_final() - (1.0 - 0.00417)).abs() < 2e-4, "{}", c.cdf_final());
    assert!(stderr(&o).contains("normalization off"));

    let o = wishart(&["pdf", "--which", "largest", "--K", "3", "--M", "8", "--grid", "0:60:400"], None);
    let c = curve_from_csv(&stdout(&o), Extreme::Largest, ModelParams::new(3, 8, 1.0).unwrap()).unwrap();
    assert!((0.999..=1.001).contains(&c.cdf_final()), "{}", c.cdf_final());
}

#[test]
fn k1_curve_is_exponential() {
    let o = wishart(&["pdf", "--K", "1", "--M", "2", "--rho", "0.5", "--grid", "0:10:1000"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    for line in stdout(&o).lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((cols[1] - (-cols[0]).exp()).abs() < 1e-8, "{line}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let o = wishart(&["pdf", "--K", "5", "--M", "4", "--grid", "0:10:100"], None);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(stderr(&o).contains("K < M"), "{}", stderr(&o));

    let o = wishart(&["sweep", "--K", "2", "--M", ""], None);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let o = wishart(&["sweep", "--K", "2"], None);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let o = wishart(&["pdf", "--K", "2", "--M", "4", "--grid", "0:10:1"], None);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let o = wishart(&["pdf", "--K", "2", "--M", "4", "--which", "middle"], None);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let o = wishart(&["pdf", "--K", "1", "--M", "2", "--grid", "0:1:5"], Some("zero"));
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(stderr(&o).contains("WISHART_THREADS"));
}

#[test]
fn sweep_fixed_rho_gives_normalized_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = wishart(
        &["sweep", "--K", "2", "--M", "3,5", "--rho-mode", "fixed", "--rho", "1", "--output", path_str(&out)],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("M,which,lambda,pdf,cdf"));
    let mut last_cdf = std::collections::BTreeMap::new();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], "largest");
        last_cdf.insert(cols[0].to_string(), cols[4].parse::<f64>().unwrap());
    }
    assert_eq!(last_cdf.len(), 2);
    for (m, cdf) in last_cdf {
        assert!((cdf - 1.0).abs() < 1e-4, "M={m}: {cdf}");
    }
}

#[test]
fn sweep_inverse_m_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let o = wishart(
        &[
            "sweep",
            "--K",
            "3",
            "--M",
            "12,30",
            "--rho-mode",
            "inverse-M",
            "--which",
            "both",
            "--format",
            "json",
            "--output",
            path_str(&out),
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["rho_mode"], "inverse-M");
    let curves = doc["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 4);
    for c in curves {
        let c: CurveDocument = serde_json::from_value(c.clone()).unwrap();
        assert!((c.params.rho() - 1.0 / c.params.m() as f64).abs() < 1e-15);
        let curve = c.into_curve().unwrap();
        assert!((curve.cdf_final() - 1.0).abs() < 1e-4);
    }
}

#[test]
fn pdf_both_writes_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("curve.json");
    let o = wishart(
        &["pdf", "--K", "2", "--M", "4,6", "--which", "both", "--format", "json", "--output", path_str(&base)],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for which in ["largest", "smallest"] {
        for m in [4, 6] {
            let p = dir.path().join(format!("curve_{which}_M{m}.json"));
            let doc: CurveDocument = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
            assert_eq!(doc.params.m(), m);
            assert_eq!(doc.which.name(), which);
            assert_eq!(doc.schema_version, 1);
            doc.into_curve().unwrap();
        }
    }
    assert!(!base.exists());

    let o = wishart(&["pdf", "--K", "2", "--M", "4,6"], None);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
}

#[test]
fn csv_file_round_trips_through_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = wishart(&["pdf", "--K", "4", "--M", "7", "--which", "smallest", "--output", path_str(&out)], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let c = curve_from_csv(&text, Extreme::Smallest, ModelParams::new(4, 7, 1.0).unwrap()).unwrap();
    assert_eq!(c.grid.len(), 2001);
    assert!((c.cdf_final() - 1.0).abs() < 1e-4);
    assert_eq!(wishart_extremes::cli::curve_to_csv(&c), text);
}

#[test]
fn validate_passes_end_to_end() {
    let o = wishart(
        &["validate", "--K", "3", "--M", "8", "--rho", "1", "--samples", "10000", "--seed", "42", "--which", "both"],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r: ValidationReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.ks.len(), 2);
    assert!(r.ks.values().all(|&k| k < 0.02), "{:?}", r.ks);
    assert!(r.passed);
    assert_eq!(r.seed, 42);
    assert_eq!(r.samples, 10_000);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["params", "which", "grid", "pdf", "cdf", "ks", "warnings", "seed", "runtime_ms", "schema_version"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["params"]["K"], 3);
    assert!(v["max_pdf_deviation"]["largest"].as_f64().unwrap() < 0.02);
}

#[test]
fn validate_small_sample_is_flagged() {
    let o = wishart(&["validate", "--K", "3", "--M", "8", "--samples", "10", "--seed", "3"], None);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let r: ValidationReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r.flags.iter().any(|f| f == "insufficient-samples"));
    assert!((r.threshold - 1.63 / 10f64.sqrt()).abs() < 1e-12);
    assert!(!r.passed);
}

fn strip_timing(report: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(report).unwrap();
    v.as_object_mut().unwrap().remove("runtime_ms");
    v
}

#[test]
fn validate_is_reproducible_across_runs_and_threads() {
    let args = [
        "validate",
        "--K",
        "2",
        "--M",
        "5",
        "--samples",
        "3000",
        "--seed",
        "11",
        "--which",
        "both",
        "--grid",
        "0:40:800",
    ];
    let a = wishart(&args, Some("1"));
    let b = wishart(&args, Some("1"));
    let c = wishart(&args, Some("8"));
    for o in [&a, &b, &c] {
        assert!(o.status.success(), "{}", stderr(o));
    }
    let strip_line = |s: String| -> String {
        s.lines().filter(|l| !l.trim_start().starts_with("\"runtime_ms\"")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip_line(stdout(&a)), strip_line(stdout(&b)));
    assert_eq!(strip_line(stdout(&a)), strip_line(stdout(&c)));
    assert_eq!(strip_timing(&stdout(&a)), strip_timing(&stdout(&c)));
}

#[test]
fn overflowing_size_exits_3() {
    let o = wishart(&["pdf", "--K", "51", "--M", "700", "--rho-mode", "inverse-M", "--grid", "1.5:1.7:3"], None);
    assert_eq!(o.status.code(), Some(EXIT_NUMERICAL), "{}", stderr(&o));
    assert!(stderr(&o).contains("failed to evaluate"));
}
