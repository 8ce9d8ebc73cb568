use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_betadiff"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn report(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    });
    let validator = schema();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
    v
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

fn noisy_csv(n: usize) -> String {
    let mut s = String::from("asset,market\n");
    for k in 0..n {
        let y = ((k * 7919) % 1009) as f64 / 1009.0;
        let e = (((k * 104_729) % 997) as f64 / 997.0 - 0.5) * 0.2;
        s.push_str(&format!("{},{}\n", y * y + e, y));
    }
    s
}

#[test]
fn estimate_reproduces_hand_example() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "x,y\n0,0\n1,1\n2,4\n");
    let out = run(&["estimate", "--input", p.to_str().unwrap(), "--weight", "identity"]);
    assert!(out.status.success());
    let v = report(&out);
    let r = &v["results"];
    assert!((r["delta_hat"].as_f64().unwrap() - (0.5 - 36.0 / 78.0)).abs() < 1e-15);
    assert!((r["beta_hat"].as_f64().unwrap() - 36.0 / 78.0).abs() < 1e-15);
    assert_eq!(r["beta_g_hat"].as_f64().unwrap(), 0.5);
    assert_eq!(r["tie_count"], 0);
    assert_eq!(v["command"], "estimate");
}

#[test]
fn estimate_flags_ties_and_swaps_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "y,x\n1,0\n1,1\n2,3\n3,2\n");
    let out = run(&["estimate", "--input", p.to_str().unwrap(), "--weight", "pht:0.75", "--columns", "y,x"]);
    assert!(out.status.success());
    let v = report(&out);
    assert_eq!(v["results"]["tie_count"], 1);
    assert_eq!(v["results"]["used_fast_path"], false);
    assert_eq!(v["inputs_echo"]["columns"], "y,x");
    assert!(!v["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn estimate_is_byte_identical_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", &noisy_csv(200));
    let args = ["estimate", "--input", p.to_str().unwrap(), "--weight", "cte:0.9"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(strip_timing(report(&a)), strip_timing(report(&b)));
    let text = |o: &Output| {
        String::from_utf8_lossy(&o.stdout).lines().filter(|l| !l.contains("elapsed_seconds")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(text(&a), text(&b));
}

#[test]
fn floats_use_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "x,y\n0,0\n1,1\n2,4\n");
    let out = run(&["estimate", "--input", p.to_str().unwrap(), "--weight", "identity"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"beta_hat\": 4.6153846153846156e-1"), "{text}");
}

#[test]
fn ingestion_errors_name_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.csv", "x,y\n1,1\n\n2,NaN\n3,3\n");
    let out = run(&["estimate", "--input", p.to_str().unwrap(), "--weight", "identity"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let e = stderr_json(&out);
    assert_eq!(e["error"]["kind"], "ingestion");
    let lines: Vec<u64> = e["error"]["lines"].as_array().unwrap().iter().map(|l| l["line"].as_u64().unwrap()).collect();
    assert_eq!(lines, vec![3, 4]);
}

#[test]
fn exit_codes_are_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write(dir.path(), "flat.csv", "x,y\n1,2\n3,2\n");
    let good = write(dir.path(), "good.csv", &noisy_csv(50));
    // Domain error: zero variance in y.
    let out = run(&["estimate", "--input", flat.to_str().unwrap(), "--weight", "identity"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "degenerate-sample");
    // Domain error: constant weight.
    let out = run(&["estimate", "--input", good.to_str().unwrap(), "--weight", "pht:1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "degenerate-weight");
    // Usage errors.
    assert_eq!(run(&["estimate", "--weight", "identity"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "--input", "/nonexistent.csv", "--weight", "identity"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "--input", good.to_str().unwrap(), "--weight", "pht:-1"]).status.code(), Some(2));
    // Assumption violation.
    let out = run(&["variance", "--model", r#"{"family":"pareto_heavy_tail","alpha":3,"sigma":0.1}"#, "--weight", "pht:2"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["condition"], "T3(ii)");
    // Help is not an error.
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn check_assumptions_reports_violation() {
    let out = run(&["check-assumptions", "--weight", "pht:0.4", "--theorem", "T2"]);
    assert_eq!(out.status.code(), Some(3));
    let v = report(&out);
    assert_eq!(v["results"]["verdict"], "violated");
    assert_eq!(v["results"]["binding_condition"], "p-q-conjugacy");
    assert_eq!(stderr_json(&out)["error"]["kind"], "assumption-violation");

    let out = run(&[
        "check-assumptions", "--weight", "pht:0.75", "--theorem", "T3", "--model", r#"{"family":"gaussian","rho":0.5}"#,
    ]);
    assert!(out.status.success());
    let v = report(&out);
    assert_eq!(v["results"]["verdict"], "satisfied");
    assert_eq!(v["results"]["b_exponent"].as_f64(), Some(0.5));
    assert_eq!(v["results"]["required_moment_order"].as_f64(), Some(4.0));
}

#[test]
fn variance_matches_gaussian_structure() {
    let out = run(&["variance", "--model", r#"{"family":"gaussian","rho":0.6}"#, "--weight", "identity"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = report(&out);
    let r = &v["results"];
    assert!(r["upsilon1_sq"].as_f64().unwrap() > 0.0);
    assert!(r["upsilon2_sq"].as_f64().unwrap() < 1e-8);
    assert!(r["population"]["delta"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn infer_is_deterministic_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", &noisy_csv(300));
    let args = [
        "infer", "--input", p.to_str().unwrap(), "--weight", "pht:0.75", "--bootstrap-reps", "200", "--seed", "42",
    ];
    let a = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&args);
    let (va, vb) = (strip_timing(report(&a)), strip_timing(report(&b)));
    assert_eq!(va, vb);
    let r = &va["results"];
    assert!(r["ci_low"].as_f64().unwrap() <= r["ci_high"].as_f64().unwrap());
    assert_eq!(r["spec_echo"]["seed"], 42);

    let out = run(&[
        "infer", "--input", p.to_str().unwrap(), "--weight", "identity", "--bootstrap-reps", "150", "--scheme",
        "m_out_of_n", "--ci-method", "basic", "--level", "0.9",
    ]);
    assert!(out.status.success());
    let v = report(&out);
    assert_eq!(v["results"]["m_used"], 45);
    assert_eq!(v["results"]["spec_echo"]["m"], 45);
}

#[test]
fn simulate_from_plan_file_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let plan = r#"{
        "model": {"family": "gaussian", "rho": 0.6},
        "weight": "identity",
        "sample_sizes": [200, 400],
        "replications": 100,
        "seed": 5,
        "checks": ["variance_match", "consistency"]
    }"#;
    let plan_path = write(dir.path(), "plan.json", plan);
    let out = run(&["simulate", "--plan", plan_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = report(&out);
    assert_eq!(v["results"]["per_n"].as_array().unwrap().len(), 2);
    assert!(v["results"]["per_n"][1]["variance_ratio"].as_f64().unwrap() > 0.0);

    let cfg = format!(r#"{{"command": "simulate", "plan_path": {:?}}}"#, plan_path.to_str().unwrap());
    let cfg_path = write(dir.path(), "cfg.json", &cfg);
    let out_path = dir.path().join("report.json");
    let out2 = run(&["--config", cfg_path.to_str().unwrap(), "--output", out_path.to_str().unwrap()]);
    assert!(out2.status.success(), "{}", String::from_utf8_lossy(&out2.stderr));
    assert!(out2.stdout.is_empty());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(strip_timing(written), strip_timing(v));
}

#[test]
fn config_file_supplies_estimate_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "0,0\n1,1\n2,4\n");
    let cfg = format!(
        r#"{{"command": "estimate", "input_path": {:?}, "weight": {{"family": "pht", "nu": 2}}}}"#,
        p.to_str().unwrap()
    );
    let cfg_path = write(dir.path(), "cfg.json", &cfg);
    let out = run(&["--config", cfg_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    report(&out);
    // Flags override the file.
    let out = run(&["--config", cfg_path.to_str().unwrap(), "estimate", "--weight", "identity"]);
    assert_eq!(report(&out)["results"]["beta_g_hat"].as_f64(), Some(0.5));
    let bad = write(dir.path(), "bad.json", r#"{"command": "estimate", "bogus": 1}"#);
    assert_eq!(run(&["--config", bad.to_str().unwrap()]).status.code(), Some(2));
}
