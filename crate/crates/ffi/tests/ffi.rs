use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use wlrgs_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(wlrgs_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn hsd_alpha_and_domain_errors() {
    let mut a = 0.0;
    let s = unsafe { wlrgs_hsd_alpha(-4.0, 0.487, 0.025, &mut a) };
    assert_eq!(s, WlrgsStatus::Ok);
    assert!((a - 0.00281).abs() < 5e-6, "{a}");

    let s = unsafe { wlrgs_hsd_alpha(-4.0, -0.5, 0.025, &mut a) };
    assert_eq!(s, WlrgsStatus::InvalidInput);
    assert!(!last_error().is_empty());

    let s = unsafe { wlrgs_hsd_alpha(-4.0, 0.5, 0.025, ptr::null_mut()) };
    assert_eq!(s, WlrgsStatus::NullPointer);
    assert!(last_error().contains("out_alpha"));
}

#[test]
fn weighted_logrank_on_the_hand_example() {
    let times = [1.0, 2.0, 1.5, 3.0];
    let events = [1u8, 1, 1, 0];
    let arms = [0u8, 0, 1, 1];
    let (mut u, mut v, mut z) = (0.0, 0.0, 0.0);
    let s = unsafe {
        wlrgs_weighted_logrank(
            times.as_ptr(),
            events.as_ptr(),
            arms.as_ptr(),
            4,
            WlrgsScheme::LogRank as u32,
            0.0,
            &mut u,
            &mut v,
            &mut z,
        )
    };
    assert_eq!(s, WlrgsStatus::Ok);
    assert!((u + 2.0 / 3.0).abs() < 1e-12);
    assert!((v - (0.25 + 2.0 / 9.0 + 0.25)).abs() < 1e-12);

    let s = unsafe {
        wlrgs_weighted_logrank(times.as_ptr(), events.as_ptr(), arms.as_ptr(), 4, 9, 0.0, &mut u, &mut v, &mut z)
    };
    assert_eq!(s, WlrgsStatus::InvalidInput);
    assert!(last_error().contains("scheme"));

    let bad_arms = [0u8, 0, 2, 1];
    let s = unsafe {
        wlrgs_weighted_logrank(times.as_ptr(), events.as_ptr(), bad_arms.as_ptr(), 4, 0, 0.0, &mut u, &mut v, &mut z)
    };
    assert_eq!(s, WlrgsStatus::InvalidInput);
}

#[test]
fn state_handle_walks_three_looks() {
    let cum = [0.00301, 0.0106, 0.025];
    let mut st = ptr::null_mut();
    assert_eq!(unsafe { wlrgs_gs_new_fixed(0.025, cum.as_ptr(), 3, &mut st) }, WlrgsStatus::Ok);
    let (mut c, mut a, mut d) = (0.0, 0.0, WlrgsDecision::Continue);
    for (v, z) in [(50.4, -0.91), (78.1, -1.53), (97.2, -2.37)] {
        let s = unsafe { wlrgs_gs_step(st, v, z, false, &mut c, &mut a, &mut d) };
        assert_eq!(s, WlrgsStatus::Ok, "{}", last_error());
    }
    assert_eq!(d, WlrgsDecision::Reject);
    assert!((c + 2.01).abs() <= 0.005);
    let mut p = 0.0;
    assert_eq!(unsafe { wlrgs_gs_stagewise_p(st, &mut p) }, WlrgsStatus::Ok);
    assert!((p - 0.015).abs() <= 0.001);

    // a stopped trial refuses further looks and keeps its state
    let s = unsafe { wlrgs_gs_step(st, 110.0, -1.0, false, &mut c, &mut a, &mut d) };
    assert_eq!(s, WlrgsStatus::StateError);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { wlrgs_gs_to_json(st, &mut json) }, WlrgsStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { wlrgs_string_free(json) };
    let mut back = ptr::null_mut();
    let c_text = CString::new(text.clone()).unwrap();
    assert_eq!(unsafe { wlrgs_gs_from_json(c_text.as_ptr(), &mut back) }, WlrgsStatus::Ok);
    let mut p2 = 0.0;
    assert_eq!(unsafe { wlrgs_gs_stagewise_p(back, &mut p2) }, WlrgsStatus::Ok);
    assert_eq!(p, p2);

    let tampered = text.replacen("0.0106", "0.001", 1);
    let c_bad = CString::new(tampered).unwrap();
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { wlrgs_gs_from_json(c_bad.as_ptr(), &mut bad) }, WlrgsStatus::StateError);
    assert!(bad.is_null());

    unsafe {
        wlrgs_gs_free(st);
        wlrgs_gs_free(back);
        wlrgs_gs_free(ptr::null_mut());
    }
}

#[test]
fn hsd_handle_matches_walk_through_first_look() {
    let mut st = ptr::null_mut();
    assert_eq!(unsafe { wlrgs_gs_new_hsd(0.025, -4.0, 103.4, 3, &mut st) }, WlrgsStatus::Ok);
    let (mut c, mut a, mut d) = (0.0, 0.0, WlrgsDecision::Reject);
    assert_eq!(unsafe { wlrgs_gs_step(st, 50.4, -0.91, false, &mut c, &mut a, &mut d) }, WlrgsStatus::Ok);
    assert_eq!(d, WlrgsDecision::Continue);
    assert!((c + 2.770).abs() <= 0.001, "{c}");
    unsafe { wlrgs_gs_free(st) };

    let mut st = ptr::null_mut();
    assert_eq!(unsafe { wlrgs_gs_new_hsd(0.0, -4.0, 103.4, 3, &mut st) }, WlrgsStatus::InvalidInput);
    assert!(st.is_null());
}

#[test]
fn stagewise_p_from_arrays() {
    let c = [-2.75, -2.35];
    let v = [50.4, 78.1, 97.2];
    let mut p = 0.0;
    assert_eq!(unsafe { wlrgs_stagewise_p(c.as_ptr(), v.as_ptr(), 3, -2.37, &mut p) }, WlrgsStatus::Ok);
    assert!((p - 0.015).abs() <= 0.001, "{p}");
    assert_eq!(unsafe { wlrgs_stagewise_p(c.as_ptr(), v.as_ptr(), 0, -2.37, &mut p) }, WlrgsStatus::InvalidInput);
}

#[test]
fn design_evaluation_as_json() {
    let cfg = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/poplar_redesign.json")).unwrap();
    let cfg = CString::new(cfg).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { wlrgs_design_evaluate(cfg.as_ptr(), &mut out) }, WlrgsStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { wlrgs_string_free(out) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let power = v[0]["power"].as_f64().unwrap();
    assert!((power - 0.90).abs() <= 0.01);

    let bad = CString::new("{\"alpha\": 1}").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { wlrgs_design_evaluate(bad.as_ptr(), &mut out) }, WlrgsStatus::InvalidInput);
    assert!(out.is_null());
    assert!(last_error().contains("config"));
}

/// Compiles and runs a C program against the generated header and the
/// static library built alongside this test.
#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libwlrgs_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let tmp = tempfile::TempDir::new().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "wlrgs.h"
int main(void) {
    double a = 0.0;
    if (wlrgs_hsd_alpha(-4.0, 0.487, 0.025, &a) != WLRGS_STATUS_OK) return 1;
    WlrgsGsState *st = NULL;
    if (wlrgs_gs_new_hsd(0.025, -4.0, 103.4, 3, &st) != WLRGS_STATUS_OK) return 2;
    double c = 0.0, cum = 0.0;
    enum WlrgsDecision d;
    if (wlrgs_gs_step(st, 50.4, -0.91, false, &c, &cum, &d) != WLRGS_STATUS_OK) return 3;
    wlrgs_gs_free(st);
    if (wlrgs_hsd_alpha(-4.0, -1.0, 0.025, &a) != WLRGS_STATUS_INVALID_INPUT) return 4;
    printf("%.3f %d %s\n", c, (int)d, wlrgs_last_error()[0] ? "err" : "none");
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "-2.769 0 err");
}
