use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sysweyl")).args(args).env("RUST_LOG", "warn").output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn coeffs_dirac_area() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = run(&["coeffs", "--config", &config("dirac.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert!((v["coeffs"]["a_global"].as_f64().unwrap() - PI).abs() < 1e-9);
    assert!(v["coeffs"]["b_global"].as_f64().unwrap().abs() < 1e-10);
    assert_eq!(v["manifest"]["command"], "coeffs");
    assert!(v["manifest"]["normalisation"].as_str().unwrap().contains("(2*pi)^(-n)"));
    assert!(dir.path().join("c.json.manifest.json").exists());
}

#[test]
fn coeffs_shifted_dirac_b() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = run(&["coeffs", "--config", &config("shifted_dirac.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let b = json(&out)["coeffs"]["b_global"].as_f64().unwrap();
    assert!((b + 2.0 * PI * 0.3).abs() < 1e-8, "b = {b}");
}

#[test]
fn symbol_form_matches_torus_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = run(&["coeffs", "--config", &config("dirac_symbol.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!((json(&out)["coeffs"]["a_global"].as_f64().unwrap() - PI).abs() < 1e-9);
}

#[test]
fn invalid_matrix_size_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"n": 2, "m": 2, "form": "torus_differential",
            "C": [[[0, 1], [1, 0]], [[0, "-i", 0], ["i", 0, 0], [0, 0, 0]]], "V": 0}"#,
    )
    .unwrap();
    let o = run(&["coeffs", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("C[1]"));
}

#[test]
fn bad_expression_reports_entry_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"n": 2, "m": 2, "form": "symbol", "A1": [["p1", "p2 +"], ["p2", "-p1"]]}"#).unwrap();
    let o = run(&["coeffs", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("A1[0][1]"));
}

#[test]
fn missing_config_is_io_error() {
    let o = run(&["coeffs", "--config", "/nonexistent/op.json"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&["coeffs", "--config", &config("dirac.json"), "--bogus"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn identities_pass_for_dirac() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("id.json");
    let o = run(&["identities", "--config", &config("dirac.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["report"]["all_passed"], true);
    for c in v["report"]["checks"].as_array().unwrap() {
        assert!(c["max_residual"].as_f64().unwrap() < 1e-10, "{c}");
    }
}

#[test]
fn dropping_curvature_fails_unitary_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("id.json");
    let o = run(&["identities", "--config", &config("dirac.json"), "--drop-curvature", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let v = json(&out);
    let check = v["report"]["checks"].as_array().unwrap().iter().find(|c| c["name"] == "unitary_invariance").unwrap().clone();
    assert_eq!(check["passed"], false);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let cfg = config("variable_dirac.json");
    for (p, threads) in [(&a, "1"), (&b, "3")] {
        let o = run(&["identities", "--config", &cfg, "--seed", "7", "--samples", "50", "--threads", threads, "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn coeffs_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let cfg = config("variable_dirac.json");
    for (p, threads) in [(&a, "1"), (&b, "4")] {
        let o = run(&["coeffs", "--config", &cfg, "--grid", "8", "--threads", threads, "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn flow_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let o = run(&["flow", "--config", &config("dirac.json"), "--point", "0,0,1,0", "--t-end", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# normalisation:")));
    assert!(text.lines().any(|l| l.starts_with("# tolerances:")));
    let last = text.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cols[0] - 3.0).abs() < 1e-12);
    assert!((cols[1] - 3.0).abs() < 1e-9);
}

#[test]
fn flow_rejects_wrong_point_length() {
    let o = run(&["flow", "--config", &config("dirac.json"), "--point", "0,0,1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_covector_is_math_error() {
    let o = run(&["flow", "--config", &config("dirac.json"), "--point", "0,0,0,0"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn loops_dirac_two_pi() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l.json");
    let o = run(&["loops", "--config", &config("dirac.json"), "--t-end", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let t = json(&out)["loops"]["shortest"].as_f64().unwrap();
    assert!((t - 2.0 * PI).abs() < 1e-6, "T = {t}");
}

#[test]
fn asym_shifted_dirac_passes() {
    let o = run(&["asym", "--config", &config("shifted_dirac.json")]);
    assert_eq!(code(&o), 0);
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("a=ã pass"), "{s}");
    assert!(s.contains("b=−b̃ pass"), "{s}");
}

#[test]
fn verify_refuses_wide_mollifier() {
    let o = run(&["verify", "--config", &config("dirac.json"), "--mollifier-width", "7"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("shortest loop"));
}

#[test]
fn verify_dirac_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = run(&["verify", "--config", &config("dirac.json"), "--K", "12", "--lambda-max", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let summary = text.lines().find_map(|l| l.strip_prefix("# summary: ")).unwrap();
    let s: Value = serde_json::from_str(summary).unwrap();
    assert!((s["loop_length"].as_f64().unwrap() - 2.0 * PI).abs() < 1e-6);
    assert!(s["max_mollified_residual"].as_f64().unwrap() < s["max_counting_residual"].as_f64().unwrap());
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "lambda,N,mollified_N,two_term,residual,truncation_tail");
    assert_eq!(rows.len(), 201);
    assert!(dir.path().join("v.csv.eigenvalues.csv").exists());
}

#[test]
fn verify_needs_torus_form() {
    let o = run(&["verify", "--config", &config("spin1_planar.json")]);
    assert_eq!(code(&o), 2);
}
