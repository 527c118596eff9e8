use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use expfam_market_ffi::*;

fn family(id: &str) -> *mut ExpfamFamily {
    let id = CString::new(id).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { expfam_family_new(id.as_ptr(), &mut f) }, ExpfamStatus::Ok);
    f
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(expfam_last_error()) }.to_str().unwrap().to_owned()
}

#[test]
fn family_functions() {
    let f = family("exponential-rate");
    unsafe {
        assert_eq!(expfam_family_dim(f), 1);
        let mut t = f64::NAN;
        assert_eq!(expfam_log_partition(f, [-1.0].as_ptr(), 1, &mut t), ExpfamStatus::Ok);
        assert_eq!(t, 0.0);
        let mut mu = [0.0];
        assert_eq!(expfam_mean_from_natural(f, [-2.0].as_ptr(), 1, mu.as_mut_ptr(), 1), ExpfamStatus::Ok);
        assert_eq!(mu[0], 0.5);
        let mut theta = [0.0];
        assert_eq!(expfam_natural_from_mean(f, [0.5].as_ptr(), 1, theta.as_mut_ptr(), 1), ExpfamStatus::Ok);
        assert_eq!(theta[0], -2.0);
        let mut d = 0.0;
        assert_eq!(expfam_bregman_divergence(f, [-2.0].as_ptr(), [-1.0].as_ptr(), 1, &mut d), ExpfamStatus::Ok);
        assert!((d - (1.0 - 2f64.ln())).abs() < 1e-15);
        let mut s = 0.0;
        assert_eq!(expfam_log_score(f, [1.0].as_ptr(), 1, [-1.0].as_ptr(), 1, &mut s), ExpfamStatus::Ok);
        assert_eq!(s, f64::NEG_INFINITY);

        assert_eq!(expfam_log_partition(f, [1.0].as_ptr(), 1, &mut t), ExpfamStatus::Domain);
        assert!(last_error().contains("outside"), "{}", last_error());
        assert_eq!(expfam_log_partition(f, ptr::null(), 1, &mut t), ExpfamStatus::NullPointer);
        expfam_family_free(f);
    }
}

#[test]
fn bad_inputs_report_status() {
    let mut f = ptr::null_mut();
    let bad = CString::new("poisson").unwrap();
    unsafe {
        assert_eq!(expfam_family_new(bad.as_ptr(), &mut f), ExpfamStatus::Config);
        assert!(f.is_null());
        assert_eq!(expfam_family_new(ptr::null(), &mut f), ExpfamStatus::NullPointer);
        let bytes = [0xffu8, 0];
        assert_eq!(expfam_family_new(bytes.as_ptr().cast(), &mut f), ExpfamStatus::InvalidUtf8);
        let g = family("categorical:3");
        let mut out = [0.0; 2];
        let status = expfam_mean_from_natural(g, [0.0; 3].as_ptr(), 3, out.as_mut_ptr(), 2);
        assert_eq!(status, ExpfamStatus::BufferTooSmall);
        expfam_family_free(g);
        expfam_family_free(ptr::null_mut());
        expfam_string_free(ptr::null_mut());
    }
}

#[test]
fn market_round_trip() {
    let f = family("categorical:2");
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(expfam_market_new(f, [0.0, 0.0].as_ptr(), 2, 1.0, &mut m), ExpfamStatus::Ok);
        let mut cost = 0.0;
        assert_eq!(expfam_market_quote(m, [0.0, 0.0].as_ptr(), 2, &mut cost), ExpfamStatus::Ok);
        assert_eq!(cost, 0.0);
        let id = CString::new("alice").unwrap();
        assert_eq!(expfam_market_execute(m, [1.0, 0.0].as_ptr(), 2, id.as_ptr(), &mut cost), ExpfamStatus::Ok);
        assert!((cost - ((1f64.exp() + 1.0).ln() - 2f64.ln())).abs() < 1e-15);
        let mut p = [0.0; 2];
        assert_eq!(expfam_market_prices(m, p.as_mut_ptr(), 2), ExpfamStatus::Ok);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);

        let mut json = ptr::null_mut();
        assert_eq!(expfam_market_state_json(m, &mut json), ExpfamStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        assert!(text.contains("\"n_trades\":1"), "{text}");
        let mut copy = ptr::null_mut();
        assert_eq!(expfam_market_from_json(json, &mut copy), ExpfamStatus::Ok);
        expfam_string_free(json);
        let mut q = [0.0; 2];
        assert_eq!(expfam_market_prices(copy, q.as_mut_ptr(), 2), ExpfamStatus::Ok);
        assert_eq!(p, q);
        expfam_market_free(copy);
        expfam_market_free(m);
        expfam_family_free(f);
    }
}

#[test]
fn json_entry_points() {
    let config = CString::new(
        r#"{"family": "categorical:2", "theta0": [0, 0], "rounds": 5, "true_theta": [0.5, 0], "seed": 3,
            "traders": [{"id": "a", "model": "risk-neutral", "belief": {"theta": [0.5, 0]}}]}"#,
    )
    .unwrap();
    let problem = CString::new(
        r#"{"family": "exponential-rate", "theta0": [-1.0], "traders": [{"theta": [-3.0], "risk_aversion": 1.0}]}"#,
    )
    .unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(expfam_simulate_json(config.as_ptr(), &mut out), ExpfamStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert_eq!(report["events"].as_array().unwrap().len(), 5);
        expfam_string_free(out);

        assert_eq!(expfam_equilibrium_json(problem.as_ptr(), 100, 1e-12, &mut out), ExpfamStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert_eq!(report["theta_eq"][0].as_f64(), Some(-2.0));
        expfam_string_free(out);

        let broken = CString::new("{").unwrap();
        assert_eq!(expfam_simulate_json(broken.as_ptr(), &mut out), ExpfamStatus::Config);
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "expfam_market.h"

int main(void) {
    ExpfamFamily *fam = NULL;
    if (expfam_family_new("exponential-rate", &fam) != EXPFAM_STATUS_OK) return 1;
    double theta = -1.0, delta = 0.5, cost = 0.0;
    ExpfamMarket *m = NULL;
    if (expfam_market_new(fam, &theta, 1, 1.0, &m) != EXPFAM_STATUS_OK) return 2;
    if (expfam_market_execute(m, &delta, 1, "c", &cost) != EXPFAM_STATUS_OK) return 3;
    double bad = 5.0;
    if (expfam_market_quote(m, &bad, 1, &cost) != EXPFAM_STATUS_DOMAIN) return 4;
    printf("%s\n", expfam_last_error());
    double price = 0.0;
    expfam_market_prices(m, &price, 1);
    printf("%.17g\n", price);
    expfam_market_free(m);
    expfam_family_free(fam);
    return 0;
}
"#;

/// Compiles a C program against the generated header and the static
/// library. Skipped when no C compiler is installed.
#[test]
fn c_program_links_against_static_library() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Test binaries live in target/<profile>/deps.
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libexpfam_market_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("domain"));
    assert_eq!(lines.next().unwrap().parse::<f64>().unwrap(), 2.0);
}
