//! CLI behavior: stdout contracts, config strictness, schema errors, and
//! the exit-code taxonomy (0 success, 1 numeric failure, 2 validation).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sqzforge")
}

fn data(name: &str) -> PathBuf {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data")).join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == key {
                return v.trim().parse().unwrap();
            }
        }
    }
    panic!("key {key} not in stdout: {text}");
}

#[test]
fn threshold_budget_project_report_reference_numbers() {
    let out = run(&["opo", "threshold", "--gplus", "3.15", "--pp", "10", "--gminus", "0.5"]);
    assert!(out.status.success());
    assert!((stdout_value(&out, "p_th_mw") - 52.5).abs() < 0.1);
    assert!((stdout_value(&out, "p_th_from_gminus_mw") - 58.3).abs() < 0.1);

    let out = run(&["opo", "budget", "--qe", "0.85", "--vis2", "0.98", "--opt", "0.45", "--esc", "0.55"]);
    assert!(out.status.success());
    assert!((stdout_value(&out, "eta_total") - 0.206).abs() < 0.001);
    assert!((stdout_value(&out, "eta_total_db") - (-6.86)).abs() < 0.01);

    let out = run(&["opo", "project", "--eta", "0.24"]);
    assert!(out.status.success());
    assert!((stdout_value(&out, "s_minus_limit_db") - (-1.19)).abs() < 0.02);
}

#[test]
fn squeeze_reports_anchor_point_and_writes_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "opo", "squeeze", "--eta", "0.23", "--ratio", "0.02", "--fs", "310", "--f", "5",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!((stdout_value(&out, "s_minus_db") - (-0.457)).abs() < 0.005);
    assert!((stdout_value(&out, "s_plus_db") - 0.706).abs() < 0.005);
    assert!(dir.path().join("squeeze.json").exists());
    let spec = std::fs::read_to_string(dir.path().join("squeezing_vs_frequency_minus.csv")).unwrap();
    assert!(spec.starts_with("# eta=0.23"));
}

#[test]
fn fit_frequency_recovers_bands_from_bundled_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit", "frequency",
        "--minus", data("squeezing_vs_frequency_minus.csv").to_str().unwrap(),
        "--plus", data("squeezing_vs_frequency_plus.csv").to_str().unwrap(),
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["converged"], true);
    let eta = report["params"][0]["value"].as_f64().unwrap();
    let fs = report["params"][2]["value"].as_f64().unwrap();
    assert!((0.20..=0.26).contains(&eta), "eta {eta}");
    assert!((270.0..=350.0).contains(&fs), "fs {fs}");
    assert!(dir.path().join("overlay_frequency.csv").exists());
}

#[test]
fn fit_power_with_fixed_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit", "power",
        "--minus", data("squeezing_vs_power_minus.csv").to_str().unwrap(),
        "--plus", data("squeezing_vs_power_plus.csv").to_str().unwrap(),
        "--f", "5", "--fix", "fs=310",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit_report.json")).unwrap())
            .unwrap();
    let eta = report["params"][0]["value"].as_f64().unwrap();
    let pth = report["params"][1]["value"].as_f64().unwrap();
    assert!((eta - 0.20).abs() < 0.04, "eta {eta}");
    assert!((100.0..=320.0).contains(&pth), "p_th {pth}");
    // the bandwidth was held
    let flags = report["flags"].as_array().unwrap();
    assert!(flags.iter().any(|f| f.as_str().unwrap().contains("held")));
}

#[test]
fn fit_lineshape_lorentzian_and_sharkfin() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit", "lineshape",
        "--input", data("pump_scan_lorentzian.csv").to_str().unwrap(),
        "--model", "lorentzian", "--regime", "critical",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit_report.json")).unwrap())
            .unwrap();
    let q = report["extra"]["q_loaded"].as_f64().unwrap();
    assert!((q - 7.1e4).abs() / 7.1e4 < 0.05, "q {q}");

    let dir2 = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit", "lineshape",
        "--input", data("pump_scan_sharkfin_2mW.csv").to_str().unwrap(),
        "--model", "sharkfin", "--regime", "critical",
        "--out", dir2.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir2.path().join("fit_report.json")).unwrap())
            .unwrap();
    let beta = report["extra"]["beta_nm_per_mw"].as_f64().unwrap();
    assert!((beta - 1.5).abs() / 1.5 < 0.10, "beta {beta}");
}

#[test]
fn validation_failures_exit_2_with_line_numbers() {
    // non-monotone trace CSV
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "frequency_hz,noise_db\n1e6,0.1\n3e6,0.2\n2e6,0.3\n").unwrap();
    let out = run(&[
        "fit", "frequency", "--minus", bad.to_str().unwrap(), "--plus", bad.to_str().unwrap(),
        "--out", dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("monotone"), "stderr: {err}");

    // strict config: unknown key is rejected with its line number
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "[cavity]\nlambda0_nm = 775\nmystery_knob = 3\n").unwrap();
    let out = run(&["cavity", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o2").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mystery_knob") && err.contains("line 3"), "stderr: {err}");

    // domain error on impossible gain
    let out = run(&["opo", "threshold", "--gplus", "0.5", "--pp", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_1() {
    // flat trace: the resonance fit cannot converge
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    let mut text = String::from("wavelength_nm,transmission\n");
    for i in 0..100 {
        text.push_str(&format!("{},0.5\n", 775.0 + i as f64 * 0.001));
    }
    std::fs::write(&flat, text).unwrap();
    let out = run(&[
        "fit", "lineshape", "--input", flat.to_str().unwrap(),
        "--out", dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_point_width_sweep_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "[modes]\ngrid_h_um = 0.04\nn_modes_pump = 9\ndump_fields = false\n",
    )
    .unwrap();
    let out = run(&[
        "modes", "--config", cfg.to_str().unwrap(), "--widths", "1.0:1.0:1",
        "--out", dir.path().join("o").to_str().unwrap(), "--quiet",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/neff_sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2, "header + one data row: {csv}");
    let report = std::fs::read_to_string(dir.path().join("o/phasematch.json")).unwrap();
    assert!(report.contains("single_point"));
}

#[test]
fn homodyne_trace_is_seed_deterministic() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = run(&[
            "opo", "homodyne", "--eta", "0.23", "--ratio", "0.02", "--f", "5",
            "--duration", "2", "--seed", "9", "--out", d.path().to_str().unwrap(), "--quiet",
        ]);
        assert!(out.status.success());
    }
    let a = std::fs::read(d1.path().join("homodyne_trace.csv")).unwrap();
    let b = std::fs::read(d2.path().join("homodyne_trace.csv")).unwrap();
    assert_eq!(a, b);
    // a different seed changes the noise realization
    let d3 = tempfile::tempdir().unwrap();
    let out = run(&[
        "opo", "homodyne", "--eta", "0.23", "--ratio", "0.02", "--f", "5",
        "--duration", "2", "--seed", "10", "--out", d3.path().to_str().unwrap(), "--quiet",
    ]);
    assert!(out.status.success());
    let c = std::fs::read(d3.path().join("homodyne_trace.csv")).unwrap();
    assert_ne!(a, c);
}
