use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lgbundle_ffi::*;

fn last_error() -> String {
    let p = lgb_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { lgb_string_free(p) };
    s
}

fn so3() -> *mut LgbGroup {
    let name = CString::new("so3").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { lgb_group_from_preset(name.as_ptr(), &mut g) }, LgbStatus::Ok);
    g
}

#[test]
fn exp_log_round_trip() {
    let g = so3();
    assert_eq!(unsafe { lgb_group_dim(g) }, 3);
    assert_eq!(unsafe { lgb_group_matrix_dim(g) }, 3);
    let xi = [0.3, -0.2, 0.5];
    let mut m = [0.0; 9];
    let mut back = [0.0; 3];
    unsafe {
        assert_eq!(lgb_group_exp(g, xi.as_ptr(), 3, m.as_mut_ptr(), 9), LgbStatus::Ok);
        assert_eq!(lgb_group_log(g, m.as_ptr(), 9, back.as_mut_ptr(), 3), LgbStatus::Ok);
        lgb_group_free(g);
    }
    for k in 0..3 {
        assert!((xi[k] - back[k]).abs() < 1e-12);
    }
}

#[test]
fn adjoint_of_exp_fixes_generator_and_bracket_is_cross_product() {
    let g = so3();
    let xi = [0.1, 0.7, -0.4];
    let mut m = [0.0; 9];
    let mut ad = [0.0; 3];
    let a = [1.0, 0.0, 0.0];
    let b = [0.0, 1.0, 0.0];
    let mut c = [0.0; 3];
    unsafe {
        assert_eq!(lgb_group_exp(g, xi.as_ptr(), 3, m.as_mut_ptr(), 9), LgbStatus::Ok);
        assert_eq!(lgb_group_adjoint(g, m.as_ptr(), 9, xi.as_ptr(), 3, ad.as_mut_ptr(), 3), LgbStatus::Ok);
        assert_eq!(lgb_group_bracket(g, a.as_ptr(), b.as_ptr(), 3, c.as_mut_ptr()), LgbStatus::Ok);
        lgb_group_free(g);
    }
    for k in 0..3 {
        assert!((ad[k] - xi[k]).abs() < 1e-12);
    }
    assert!((c[0]).abs() < 1e-14 && (c[1]).abs() < 1e-14 && (c[2] - 1.0).abs() < 1e-14);
}

#[test]
fn errors_set_status_and_message() {
    let g = so3();
    let xi = [0.0; 2];
    let mut m = [0.0; 9];
    let status = unsafe { lgb_group_exp(g, xi.as_ptr(), 2, m.as_mut_ptr(), 9) };
    assert_eq!(status, LgbStatus::InvalidArgument);
    assert!(last_error().contains("needs 3"));

    let status = unsafe { lgb_group_exp(ptr::null(), xi.as_ptr(), 2, m.as_mut_ptr(), 9) };
    assert_eq!(status, LgbStatus::NullArgument);

    let not_rotation = [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut out = [0.0; 3];
    let status = unsafe { lgb_group_log(g, not_rotation.as_ptr(), 9, out.as_mut_ptr(), 3) };
    assert_eq!(status, LgbStatus::Numerical);

    let bad = CString::new("so99x").unwrap();
    let mut h = ptr::null_mut();
    assert_ne!(unsafe { lgb_group_from_preset(bad.as_ptr(), &mut h) }, LgbStatus::Ok);
    assert!(h.is_null());

    let ok = [0.0; 3];
    assert_eq!(unsafe { lgb_group_exp(g, ok.as_ptr(), 3, m.as_mut_ptr(), 9) }, LgbStatus::Ok);
    assert!(lgb_last_error_message().is_null());
    unsafe { lgb_group_free(g) };
}

#[test]
fn scenario_validate_reports_json_lines() {
    let name = CString::new("gauge-jet-abelian").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lgb_scenario_from_preset(name.as_ptr(), &mut s) }, LgbStatus::Ok);
    let mut report = ptr::null_mut();
    let mut failed = usize::MAX;
    assert_eq!(unsafe { lgb_scenario_validate(s, 0, 20, &mut report, &mut failed) }, LgbStatus::Ok);
    let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    unsafe {
        lgb_string_free(report);
        lgb_scenario_free(s);
    }
    assert_eq!(failed, 0);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("{\"summary\""));
    assert!(!text.contains("elapsed_ms"));
}

#[test]
fn scenario_transport_along_preset_curve() {
    let name = CString::new("principal-so3").unwrap();
    let curve = CString::new("loop").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lgb_scenario_from_preset(name.as_ptr(), &mut s) }, LgbStatus::Ok);
    let mut m = [0.0; 9];
    let mut membership = -1.0;
    let status = unsafe { lgb_scenario_transport(s, curve.as_ptr(), ptr::null(), 0, m.as_mut_ptr(), 9, &mut membership) };
    assert_eq!(status, LgbStatus::Ok);
    assert!((0.0..=1e-9).contains(&membership));
    let missing = CString::new("nowhere").unwrap();
    let status = unsafe { lgb_scenario_transport(s, missing.as_ptr(), ptr::null(), 0, m.as_mut_ptr(), 9, ptr::null_mut()) };
    assert_eq!(status, LgbStatus::InvalidArgument);
    unsafe { lgb_scenario_free(s) };
}

#[test]
fn abelian_curvature_is_antisymmetrized_derivative() {
    let name = CString::new("gauge-jet-abelian").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lgb_scenario_from_preset(name.as_ptr(), &mut s) }, LgbStatus::Ok);
    let (n, d) = (3, 3);
    let a: Vec<f64> = (0..n * d).map(|i| 0.1 * i as f64).collect();
    let da: Vec<f64> = (0..n * n * d).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let mut f = vec![0.0; n * n * d];
    let status = unsafe {
        lgb_scenario_utiyama_curvature(s, a.as_ptr(), a.len(), da.as_ptr(), da.len(), f.as_mut_ptr(), f.len())
    };
    assert_eq!(status, LgbStatus::Ok);
    for mu in 0..n {
        for nu in 0..n {
            for k in 0..d {
                let expect = da[(mu * n + nu) * d + k] - da[(nu * n + mu) * d + k];
                assert!((f[(mu * n + nu) * d + k] - expect).abs() < 1e-14);
            }
        }
    }
    unsafe { lgb_scenario_free(s) };
}

#[test]
fn scenario_from_bad_json_is_a_config_error() {
    let json = CString::new(r#"{"name":"x","preset":"principal-so3","bogus":1}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lgb_scenario_from_json(json.as_ptr(), &mut s) }, LgbStatus::Config);
    assert!(last_error().contains("bogus"));
}

/// Compiles a C program against the generated header and the static
/// library and runs it.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liblgbundle_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "lgbundle.h"
int main(void) {
    LgbGroup *g = NULL;
    if (lgb_group_from_preset("so3", &g) != LGB_STATUS_OK) return 10;
    double xi[3] = {0.2, 0.1, -0.3}, m[9], back[3];
    if (lgb_group_exp(g, xi, 3, m, 9) != LGB_STATUS_OK) return 11;
    if (lgb_group_log(g, m, 9, back, 3) != LGB_STATUS_OK) return 12;
    for (int k = 0; k < 3; k++) {
        double e = back[k] - xi[k];
        if (e > 1e-12 || e < -1e-12) return 13;
    }
    if (lgb_group_exp(g, xi, 2, m, 9) != LGB_STATUS_INVALID_ARGUMENT) return 14;
    char *msg = lgb_last_error_message();
    if (msg == NULL) return 15;
    lgb_string_free(msg);
    lgb_group_free(g);
    printf("ok %s\n", lgb_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
