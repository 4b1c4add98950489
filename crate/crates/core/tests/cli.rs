use std::process::{Command, Output};

use lgbundle::config::{preset, ConnectionSpec, Definition};
use lgbundle::report::RunReport;
use serde_json::Value;

fn lgbundle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgbundle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn config_dir() -> String {
    format!("{}/../../configs", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn broken_cocycle_exits_1_and_lists_group_connection_check() {
    let mut cfg = preset("principal-so3").unwrap();
    cfg.name = "broken".into();
    cfg.samples = 10;
    let Some(Definition::Principal(def)) = &mut cfg.definition else {
        panic!("principal preset");
    };
    let ConnectionSpec::PrincipalForm { coefficients } = def.connection.clone() else {
        panic!("principal form");
    };
    def.connection = ConnectionSpec::Perturbed {
        coefficients,
        offset: vec![0.3, 0.0, -0.2],
    };
    cfg.checks = Some(vec!["validate_group_connection".into(), "action_axioms".into()]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    let out = lgbundle(&["validate", "--config", path.to_str().unwrap(), "--no-meta"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("validate_group_connection"));
    let report = RunReport::from_jsonl(&stdout(&out)).unwrap();
    assert_eq!(report.summary.failing, vec!["validate_group_connection".to_string()]);
}

#[test]
fn empty_check_list_is_a_usage_error() {
    let out = lgbundle(&["validate", "--scenario", "affine-constant", "--checks", ""]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty check list"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, r#"{"name":"e","preset":"affine-constant","checks":[]}"#).unwrap();
    let out = lgbundle(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_preset_and_unknown_check_are_errors() {
    assert_eq!(lgbundle(&["validate", "--scenario", "nope"]).status.code(), Some(2));
    let out = lgbundle(&["validate", "--scenario", "gauge-jet-abelian", "--checks", "no_such_check"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(lgbundle(&["validate"]).status.code(), Some(2));
}

#[test]
fn flat_configs_pass_every_check() {
    for name in ["flat-affine.json", "trivial-so3.json"] {
        let path = format!("{}/{name}", config_dir());
        let out = lgbundle(&["validate", "--config", &path, "--no-meta"]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stdout(&out));
    }
}

#[test]
fn abelian_gauge_preset_passes_and_report_audits_clean() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.jsonl");
    let csv = dir.path().join("r.csv");
    let out = lgbundle(&[
        "validate",
        "--scenario",
        "gauge-jet-abelian",
        "--out",
        report.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&report).unwrap();
    let parsed = RunReport::from_jsonl(&text).unwrap();
    assert!(parsed.summary.meta.is_some());
    assert!(parsed.audit().is_empty());
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), parsed.records.len() + 1);

    let table = lgbundle(&["report", "--input", report.to_str().unwrap()]);
    assert_eq!(table.status.code(), Some(0));
    assert!(stdout(&table).contains("checks pass"));
}

#[test]
fn report_audit_catches_a_flipped_verdict() {
    let out = lgbundle(&["validate", "--scenario", "gauge-jet-abelian", "--no-meta"]);
    let text = stdout(&out).replacen("\"pass\":true", "\"pass\":false", 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tampered.jsonl");
    std::fs::write(&path, text).unwrap();
    let audited = lgbundle(&["report", "--input", path.to_str().unwrap()]);
    assert_eq!(audited.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&audited.stderr).contains("audit:"));
}

#[test]
fn trivial_connection_transport_keeps_fiber_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trivial.json");
    std::fs::write(
        &path,
        r#"{"name":"t","definition":{"kind":"principal","group":"so3",
            "base":{"label":"X","lower":[-1,-1],"upper":[1,1]},
            "connection":{"type":"trivial"},
            "curves":[{"type":"line","id":"l","start":[-0.5,0.2],"end":[0.6,-0.3]}]}}"#,
    )
    .unwrap();
    let out = lgbundle(&["transport", "--config", path.to_str().unwrap(), "--fiber", "0.2,-0.1,0.4", "--no-meta"]);
    assert_eq!(out.status.code(), Some(0));
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let start = rec["start"]["fiber"].as_array().unwrap();
    let end = rec["end"]["fiber"].as_array().unwrap();
    for (a, b) in start.iter().zip(end) {
        for (x, y) in a.as_array().unwrap().iter().zip(b.as_array().unwrap()) {
            assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_affine_transport_matches_closed_form() {
    let out = lgbundle(&["transport", "--scenario", "affine-constant", "--no-meta"]);
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(rec["closed_form_gap"].as_f64().unwrap() <= 1e-7);
    assert_eq!(out.status.code(), Some(0), "{rec}");
}

#[test]
fn so3_loop_holonomy_stays_in_the_group() {
    let out = lgbundle(&["transport", "--scenario", "principal-so3", "--curve", "loop", "--no-meta"]);
    assert_eq!(out.status.code(), Some(0));
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(rec["closed"], Value::Bool(true));
    assert!(rec["membership_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn curvature_vanishes_on_equal_vectors() {
    let out = lgbundle(&[
        "curvature", "--scenario", "principal-so3", "--point", "0.1,-0.2", "--u1", "0.3,0.4", "--u2", "0.3,0.4",
        "--no-meta",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    for v in rec["bracket"].as_array().unwrap() {
        assert!(v.as_f64().unwrap().abs() < 1e-8);
    }
}

#[test]
fn gauge_curvature_reports_invariance() {
    let out = lgbundle(&["curvature", "--scenario", "gauge-jet-so3", "--no-meta"]);
    assert_eq!(out.status.code(), Some(0));
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(rec["invariance_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn no_meta_reports_are_byte_identical() {
    let args = ["validate", "--scenario", "affine-varying", "--samples", "10", "--seed", "3", "--no-meta"];
    let a = lgbundle(&args);
    let b = lgbundle(&args);
    assert_eq!(a.stdout, b.stdout);
    let c = lgbundle(&["validate", "--scenario", "affine-varying", "--samples", "10", "--seed", "4", "--no-meta"]);
    assert_ne!(a.stdout, c.stdout);
}
