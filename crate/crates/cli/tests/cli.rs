use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn hopfion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopfion")).args(args).env_remove("HOPFION_THREADS").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn hopf_box_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "hopf.qf3");
    let out = hopfion(&["gen", "--name", "hopf_box", "--dims", "48", "--R", "6", "-o", &f]);
    assert!(out.status.success());
    let out = hopfion(&["invariants", "--hopf", &f, "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["hopf"]["snapped"], 1);
    assert_eq!(v["confidence"], "OK");
}

#[test]
fn matrix_class() {
    let out = hopfion(&["invariants", "--class", "--divisibility", "--name", "t3", "--matrix", "3,1,2;-5,0,-2", "--dims", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["class"]["class"], serde_json::json!([-2, -4, 5]));
    assert_eq!(v["result"]["divisibility"], 1);
    assert!(v["timestamp"].is_u64());
}

#[test]
fn develop_consistency_sweep() {
    let out = hopfion(&["sweep", "--check", "develop_consistency", "--dims", "16,32,64"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|&c| c == "ratio").unwrap();
    let ratios: Vec<f64> = lines.filter_map(|l| l.split(',').nth(col).unwrap().parse().ok()).collect();
    assert_eq!(ratios.len(), 2);
    for r in ratios {
        assert!((3.5..4.5).contains(&r), "ratio {r}");
    }
}

#[test]
fn reports_do_not_depend_on_threads() {
    let args = ["invariants", "--name", "random_smooth", "--band", "3", "--seed", "4", "--dims", "16", "--no-timestamp"];
    let a = hopfion(&[&["--threads", "1"], &args[..]].concat());
    let b = Command::new(env!("CARGO_BIN_EXE_hopfion")).args(args).env("HOPFION_THREADS", "3").output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(json(&a).get("timestamp").is_none());
}

#[test]
fn validation_errors_exit_2() {
    assert_eq!(hopfion(&["invariants", "--name", "power", "--n", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(hopfion(&["invariants", "--name", "nope"]).status.code(), Some(2));
    assert_eq!(hopfion(&["invariants", "--name", "power", "--n", "1", "--dims", "4"]).status.code(), Some(2));
    assert_eq!(hopfion(&["--threads", "0", "invariants", "--name", "hopf_box"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hopfion(&["energy", &path(dir.path(), "missing.qf3")]).status.code(), Some(2));
}

#[test]
fn class_mismatch_exits_3_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, r) = (path(dir.path(), "a.qf3"), path(dir.path(), "b.qf3"), path(dir.path(), "r.json"));
    assert!(hopfion(&["gen", "--name", "p", "--m", "1,0,0", "--dims", "16", "-o", &a]).status.success());
    assert!(hopfion(&["gen", "--name", "p", "--m", "0,1,0", "--dims", "16", "-o", &b]).status.success());
    let out = hopfion(&["intertwine", &a, "--psi", &b, "-o", &r]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&r).unwrap()).unwrap();
    assert_eq!(v["errors"][0]["kind"], "class_mismatch");
    assert_eq!(v["confidence"], "LOW_CONFIDENCE");
    assert!(v["tolerances"]["snap_tol"].is_f64());
}

#[test]
fn fractional_degree_is_a_data_error() {
    let out = hopfion(&["invariants", "--degree", "--name", "singular", "--id", "half_degree", "--dims", "32"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["result"]["degree"]["confidence"], "LOW_CONFIDENCE");
    let raw = v["result"]["degree"]["raw"].as_f64().unwrap();
    assert!((0.4..0.6).contains(&raw));
}

#[test]
fn upsilon_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.qf3");
    let phi = path(dir.path(), "phi.qf3");
    assert!(hopfion(&["gen", "--name", "p", "--m", "1,0,0", "--dims", "16", "-o", &a]).status.success());
    let out = hopfion(&["invariants", &a, "--upsilon", &a]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["upsilon"]["snapped"], 0);
    assert_eq!(v["result"]["upsilon"]["modulus"], 2);
    let out = hopfion(&["intertwine", &a, "--psi", &a, "--phi-out", &phi]);
    assert_eq!(out.status.code(), Some(0));
    assert!(Path::new(&phi).exists());
}

#[test]
fn energy_and_lift_reports() {
    let out = hopfion(&["energy", "--name", "singular", "--id", "eta2", "--dims", "24"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["result"]["functional"], "faddeev");
    assert!(v["result"]["energy"]["max_quartic_density"].as_f64().unwrap() < 1e-10);

    let out = hopfion(&["lift", "--name", "p", "--m", "1,0,0", "--dims", "16"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["errors"][0]["kind"], "harmonic_obstruction");

    let dir = tempfile::tempdir().unwrap();
    let u = path(dir.path(), "u.qf3");
    let out = hopfion(&["lift", "--name", "hopf_box", "--dims", "24", "--lift-out", &u]);
    assert!(out.status.success());
    assert!(json(&out)["result"]["lift"]["flatness"].is_f64());
    let out = hopfion(&["invariants", "--degree", &u]);
    assert_eq!(json(&out)["result"]["degree"]["snapped"], 1);
}

#[test]
fn cech_report_routes_agree() {
    let out = hopfion(&["cech", "--name", "p", "--m", "0,-1,1", "--dims", "24"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["result"]["cech"]["routes_agree"], true);
    assert_eq!(v["result"]["cech"]["cocycle_class"], serde_json::json!([0, -1, 1]));
}

#[test]
fn relax_writes_a_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path(dir.path(), "trace.csv");
    let out = hopfion(&[
        "relax", "--name", "p", "--m", "1,0,0", "--dims", "20", "--perturb", "0.05", "--steps", "20", "--step-size", "1e-5",
        "--trace", &trace,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["result"]["invariants_constant"], true);
    let text = std::fs::read_to_string(&trace).unwrap();
    let energies: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len(), 21);
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));
    assert!(text.lines().nth(1).unwrap().contains("1 0 0"));
}
