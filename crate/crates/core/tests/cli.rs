use std::path::PathBuf;
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

const UNSTABLE_PAIR: &str = r#"{"num":[1],"den":[1,-1,1]}"#;

fn rir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rir")).args(args).output().expect("binary runs")
}

fn schema(name: &str) -> JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::compile(&v).expect("schema compiles")
}

fn assert_valid(s: &JSONSchema, v: &Value) {
    if let Err(errors) = s.validate(v) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:?}\n{v:#}");
    }
}

fn json_out(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn g1_json() -> String {
    let (zeta, wc) = (0.05f64, 2.94467f64);
    let den_u = [1.0, -1.0, 1.0];
    let den_s = [wc * wc, 2.0 * zeta * wc, 1.0];
    let mut den = [0.0; 5];
    for (i, a) in den_u.iter().enumerate() {
        for (j, b) in den_s.iter().enumerate() {
            den[i + j] += a * b;
        }
    }
    // Unnormalized; the peak gain does not affect the stabilizer corner.
    serde_json::json!({ "num": [wc * wc], "den": den }).to_string()
}

#[test]
fn analyze_unstable_pair() {
    let v = json_out(&rir(&["analyze", UNSTABLE_PAIR]));
    assert_valid(&schema("analyze.schema.json"), &v);
    assert_eq!(v["exactness"]["status"], "exact");
    assert!((v["bounds"]["rho_p"].as_f64().unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-11);
    assert_eq!(v["closed_loop_poles"].as_array().unwrap().len(), 3);
}

#[test]
fn analyze_multi_peak_plant() {
    let v = json_out(&rir(&["analyze", &g1_json()]));
    assert_valid(&schema("analyze.schema.json"), &v);
    assert_eq!(v["class"]["subclass"], "G_2dagger");
    let a = v["stabilizer"]["a"].as_f64().unwrap();
    assert!((a - 1.31963).abs() < 1e-3, "a = {a}");
    assert_eq!(v["notch"]["consistent"], true);
}

#[test]
fn analyze_is_deterministic() {
    let a = rir(&["analyze", UNSTABLE_PAIR]);
    let b = rir(&["analyze", UNSTABLE_PAIR]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(rir(&["analyze", r#"{"num":[1],"den":[1,1]}"#]).status.code(), Some(2));
    assert_eq!(rir(&["analyze", r#"{"num":[1],"den":[-2,-1,1],"x":1}"#]).status.code(), Some(1));
    assert_eq!(rir(&["analyze", "/nonexistent/system.json"]).status.code(), Some(1));
    // Zero at 1 between poles at -1 and 2 with no other real unstable pole: PIP fails.
    assert_eq!(rir(&["analyze", r#"{"num":[-1,1],"den":[-2,-1,1]}"#]).status.code(), Some(2));
    let out = rir(&["analyze", r#"{"num":[1],"den":[1,1]}"#]);
    assert!(!out.stderr.is_empty());
}

#[test]
fn stabilize_reports_strict_perturbation() {
    let v = json_out(&rir(&["stabilize", UNSTABLE_PAIR]));
    assert_valid(&schema("stabilize.schema.json"), &v);
    assert_eq!(v["stabilizer"]["kind"], "first_order_allpass");
    assert_eq!(v["strict"]["stabilizer"]["kind"], "perturbed");
    let poles = v["strict"]["stabilizer"]["closed_loop_poles"].as_array().unwrap();
    assert!(poles.iter().all(|p| p["re"].as_f64().unwrap() < 0.0));
}

#[test]
fn crmax_output() {
    let v = json_out(&rir(&["crmax", "--omega-p", "1", "--theta-p", "-1.5707963267948966", "--grid", "100000"]));
    assert_valid(&schema("crmax.schema.json"), &v);
    assert!((v["closed_form"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    let (gap, slack) = (v["gap"].as_f64().unwrap(), v["slack"].as_f64().unwrap());
    assert!(gap >= -slack && gap < 1e-3);
    let v = json_out(&rir(&["crmax", "--omega-p", "2", "--theta-p", "1", "--family", "ap_product", "--grid", "2000"]));
    assert_valid(&schema("crmax.schema.json"), &v);
    assert!(v["gap"].as_f64().unwrap() > 0.0);
}

#[test]
fn csv_outputs_carry_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bode.csv");
    let out = rir(&["bode", UNSTABLE_PAIR, "--points", "20", "--tol-axis", "1e-9", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# tolerances:") && text.contains("axis=1e-9"));
    assert_eq!(text.lines().count(), 22);

    let out = rir(&["nyquist", r#"{"num":[-2],"den":[-1,1]}"#, "--points", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("nu_o=1"), "{text}");

    let out = rir(&["sweep2nd", "--n", "5", "--p-min", "-2", "--p-max", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.ends_with(",undecided")));
    assert!(text.lines().any(|l| l.ends_with(",exact")));
}

#[test]
fn config_file_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rir.toml");
    std::fs::write(&cfg, "workers = 2\n[tolerances]\ncond = 1e-6\n").unwrap();
    let out = rir(&["--config", cfg.to_str().unwrap(), "bode", UNSTABLE_PAIR, "--points", "3"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("cond=1e-6"));
    std::fs::write(&cfg, "[tolerances]\nbogus = 1\n").unwrap();
    let out = rir(&["--config", cfg.to_str().unwrap(), "analyze", UNSTABLE_PAIR]);
    assert_eq!(out.status.code(), Some(1));
}
