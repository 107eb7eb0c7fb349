use std::path::PathBuf;
use std::process::Command;

use qmaxent::fixtures::{staffelberg, triangle};
use qmaxent::{ObservableConfig, ObservableSet};
use qmaxent_cli::io::{CurveTable, DemoTable, ProfileTable};
use qmaxent_cli::{EXIT_INPUT, EXIT_OUTSIDE};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn qmaxent(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qmaxent")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn load(name: &str) -> ObservableSet {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let cfg: ObservableConfig = serde_json::from_str(&text).unwrap();
    ObservableSet::from_config(cfg).unwrap()
}

fn assert_same_set(a: &ObservableSet, b: &ObservableSet) {
    assert_eq!(a.dim(), b.dim());
    assert_eq!(a.len(), b.len());
    let pairs = a.observables().iter().zip(b.observables()).chain([(a.theta(), b.theta())]);
    for (x, y) in pairs {
        let mut d = x.clone();
        d.add_scaled(-1.0, y);
        assert!(d.frobenius_norm() <= 1e-15, "fixture differs by {}", d.frobenius_norm());
    }
}

#[test]
fn shipped_configs_match_builtin_fixtures() {
    assert_same_set(&load("staffelberg.json"), staffelberg().observable_set());
    assert_same_set(&load("triangle.json"), &triangle());
}

#[test]
fn infer_at_m0_returns_face_compressed_state() {
    let (code, stdout, _) = qmaxent(&["infer", "--staffelberg", "--m", "0,1"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["path"], "FACE_COMPRESSED(1)");
    let eig: Vec<f64> = serde_json::from_value(v["eigenvalues"].clone()).unwrap();
    assert!((eig[0] - 0.5).abs() < 1e-8 && (eig[1] - 0.5).abs() < 1e-8 && eig[2].abs() < 1e-8);
    let obj = v["objective"].as_f64().unwrap();
    assert!((obj - (3f64.ln() - 2f64.ln())).abs() < 1e-8);
}

#[test]
fn config_and_builtin_give_same_inference() {
    let cfg = fixture("staffelberg.json");
    let (c1, a, _) = qmaxent(&["infer", "--config", cfg.to_str().unwrap(), "--m", "0.1,-0.2"]);
    let (c2, b, _) = qmaxent(&["infer", "--staffelberg", "--m", "0.1,-0.2"]);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
}

#[test]
fn exit_codes() {
    let (code, _, stderr) = qmaxent(&["infer", "--staffelberg", "--m", "0,2"]);
    assert_eq!(code, EXIT_OUTSIDE);
    let err: Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(err["error"].is_string() && err["message"].is_string());

    let (code, _, _) = qmaxent(&["infer", "--m", "0,1"]);
    assert_eq!(code, EXIT_INPUT, "missing observables");
    let (code, _, _) = qmaxent(&["infer", "--staffelberg", "--m", "0,1,2"]);
    assert_eq!(code, EXIT_INPUT, "wrong length");
    let (code, _, _) = qmaxent(&["nonsense"]);
    assert_eq!(code, EXIT_INPUT);
    let (code, _, _) = qmaxent(&["--config", "/nonexistent.json", "infer", "--m", "0,0"]);
    assert_eq!(code, EXIT_INPUT);
    let (code, stdout, _) = qmaxent(&["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("infer"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let runs: Vec<_> = ["1", "3"]
        .iter()
        .map(|j| qmaxent(&["scan", "--staffelberg", "--points", "180", "--jobs", j]))
        .collect();
    assert_eq!(runs[0].0, 0);
    assert_eq!(runs[0].1, runs[1].1);

    let demo = |j: &str| qmaxent(&["demo", "--staffelberg", "--named-state", "mixed", "--seed", "9", "--jobs", j]);
    let (a, b) = (demo("1"), demo("2"));
    assert_eq!(a.0, 0);
    assert_eq!(a.1, b.1);
    assert_ne!(a.1, demo_with_seed("10"));
}

fn demo_with_seed(seed: &str) -> String {
    qmaxent(&["demo", "--staffelberg", "--named-state", "mixed", "--seed", seed]).1
}

#[test]
fn artifacts_round_trip() {
    let dir = std::env::temp_dir().join(format!("qmaxent-cli-test-{}", std::process::id()));
    let d = dir.to_str().unwrap();
    let (code, _, _) = qmaxent(&["scan", "--staffelberg", "--points", "120", "--out", d]);
    assert_eq!(code, 0);
    let (code, _, _) = qmaxent(&["fig3", "--staffelberg", "--directions", "90", "--out", d]);
    assert_eq!(code, 0);
    let (code, _, _) = qmaxent(&["demo", "--staffelberg", "--named-state", "mixed", "--shots", "100,1000", "--out", d]);
    assert_eq!(code, 0);

    let text = std::fs::read_to_string(dir.join("scan_profile.csv")).unwrap();
    let table = ProfileTable::from_csv(&text).unwrap();
    assert_eq!((table.k, table.n), (2, 3));
    assert!(table.rows.len() >= 120);
    assert_eq!(table.to_csv().unwrap(), text);

    let text = std::fs::read_to_string(dir.join("fig3.csv")).unwrap();
    assert_eq!(CurveTable::from_csv(&text).unwrap().to_csv().unwrap(), text);

    let text = std::fs::read_to_string(dir.join("demo.csv")).unwrap();
    let demo = DemoTable::from_csv(&text).unwrap();
    assert_eq!(demo.rows.len(), 2);
    assert_eq!(demo.to_csv().unwrap(), text);

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn triangle_scan_has_no_jumps() {
    let cfg = fixture("triangle.json");
    let (code, stdout, _) = qmaxent(&["scan", "--config", cfg.to_str().unwrap(), "--points", "240"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["jump_candidates"].as_array().unwrap().len(), 0);
}

#[test]
fn staffelberg_scan_finds_the_jump() {
    let (code, stdout, _) = qmaxent(&["scan", "--staffelberg", "--points", "240"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let jumps = v["jump_candidates"].as_array().unwrap();
    assert_eq!(jumps.len(), 1);
    assert!((jumps[0]["gap"].as_f64().unwrap() - 0.5).abs() < 1e-3);
}

#[test]
fn support_and_openness_commands() {
    let (code, stdout, _) = qmaxent(&["support", "--staffelberg", "--u", "0,1"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert!((v["support"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["face_rank"], 2);

    let (code, stdout, _) = qmaxent(&["openness", "--staffelberg", "--named-state", "c", "--seed", "17"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["verdict"], "NOT_OPEN_AT_SCALE");
}
