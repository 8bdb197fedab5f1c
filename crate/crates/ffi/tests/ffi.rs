use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use unishrink_ffi::*;

fn prior(json: &str) -> *mut UsPrior {
    let text = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { us_prior_from_json(text.as_ptr(), &mut out) };
    assert_eq!(status, UsStatus::Ok, "{}", last_error());
    out
}

fn last_error() -> String {
    let p = us_last_error();
    if p.is_null() {
        return String::new();
    }
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn options(iters: u64, burnin: u64, seed: u64) -> UsChainOptions {
    UsChainOptions {
        iters,
        burnin,
        seed,
        ..us_chain_options_default()
    }
}

#[test]
fn version_and_defaults() {
    let v = unsafe { CStr::from_ptr(us_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let d = us_chain_options_default();
    assert_eq!((d.iters, d.burnin, d.thin), (15_000, 5_000, 1));
}

#[test]
fn prior_evaluation() {
    let p = prior(r#"{"family":"ep","q":1}"#);
    let mut t = 0.0;
    let mut lg = 0.0;
    unsafe {
        assert_eq!(us_prior_inverse_cdf(p, 1.0, 0.5, 0.5, &mut t), UsStatus::Ok);
        assert_eq!(us_prior_log_density(p, 1.0, 0.5, &mut lg), UsStatus::Ok);
        us_prior_free(p);
    }
    assert!((t - (0.5 + 2f64.ln())).abs() < 1e-12);
    assert!(lg.is_finite());
}

#[test]
fn errors_are_reported() {
    let bad = CString::new(r#"{"family":"ep","q":-1}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { us_prior_from_json(bad.as_ptr(), &mut out) }, UsStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(!last_error().is_empty());

    let garbage = CString::new("{").unwrap();
    assert_eq!(unsafe { us_prior_from_json(garbage.as_ptr(), &mut out) }, UsStatus::InvalidArgument);
    assert!(last_error().contains("prior JSON"));

    assert_eq!(unsafe { us_prior_from_json(ptr::null(), &mut out) }, UsStatus::NullPointer);

    let p = prior(r#"{"family":"log"}"#);
    let mut v = 0.0;
    assert_eq!(unsafe { us_prior_inverse_cdf(p, 1.0, 0.5, 1.5, &mut v) }, UsStatus::Numerical);
    unsafe { us_prior_free(p) };

    // frees accept NULL
    unsafe {
        us_prior_free(ptr::null_mut());
        us_precision_fit_free(ptr::null_mut());
        us_regression_fit_free(ptr::null_mut());
    }
}

#[test]
fn precision_fit() {
    let p = prior(r#"{"family":"log","tau":{"half_cauchy":1}}"#);
    let s = [4.0, 1.0, 1.0, 3.0];
    let opts = options(2_000, 500, 7);
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { us_fit_precision(p, s.as_ptr(), 2, 10.0, &opts, &mut fit) }, UsStatus::Ok);
    unsafe {
        assert_eq!(us_precision_fit_dim(fit), 2);
        assert_eq!(us_precision_fit_num_draws(fit), 1_500);
        assert!(us_precision_fit_fallback_rate(fit) < 1e-3);

        let mut mean = [0.0; 4];
        assert_eq!(us_precision_fit_mean_omega(fit, mean.as_mut_ptr(), 3), UsStatus::BufferTooSmall);
        assert_eq!(us_precision_fit_mean_omega(fit, mean.as_mut_ptr(), 4), UsStatus::Ok);
        assert_eq!(mean[1], mean[2]);
        assert!(mean[0] > 0.0 && mean[0] * mean[3] > mean[1] * mean[1]);

        let mut draw = [0.0; 3];
        assert_eq!(us_precision_fit_draw(fit, 0, draw.as_mut_ptr(), 3), UsStatus::Ok);
        assert!(draw[0] > 0.0 && draw[2] > 0.0);
        assert_eq!(us_precision_fit_draw(fit, 1_500, draw.as_mut_ptr(), 3), UsStatus::InvalidArgument);

        // same seed, same chain
        let mut again = ptr::null_mut();
        assert_eq!(us_fit_precision(p, s.as_ptr(), 2, 10.0, &opts, &mut again), UsStatus::Ok);
        let mut mean2 = [0.0; 4];
        us_precision_fit_mean_omega(again, mean2.as_mut_ptr(), 4);
        assert_eq!(mean, mean2);

        us_precision_fit_free(again);
        us_precision_fit_free(fit);
    }

    let not_spd = [1.0, 2.0, 2.0, 1.0];
    let mut fit = ptr::null_mut();
    let status = unsafe { us_fit_precision(p, not_spd.as_ptr(), 2, 10.0, &opts, &mut fit) };
    assert_ne!(status, UsStatus::Ok);
    assert!(fit.is_null());
    unsafe { us_prior_free(p) };
}

#[test]
fn regression_fit() {
    let p = prior(r#"{"family":"ep","q":0.5}"#);
    // y = 2 x1 with small noise, x2 irrelevant
    let n = 40;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let a = (i as f64 * 0.37).sin();
        let b = (i as f64 * 1.13).cos();
        x.extend([a, b]);
        y.push(2.0 * a + 0.01 * (i as f64 * 2.71).sin());
    }
    let opts = options(3_000, 1_000, 3);
    let mut fit = ptr::null_mut();
    let status = unsafe { us_fit_regression(p, x.as_ptr(), y.as_ptr(), n, 2, &opts, &mut fit) };
    assert_eq!(status, UsStatus::Ok, "{}", last_error());
    let mut beta = [0.0; 2];
    unsafe {
        assert_eq!(us_regression_fit_mean_beta(fit, beta.as_mut_ptr(), 2), UsStatus::Ok);
        assert!(us_regression_fit_mean_sigma2(fit) < 1e-2);
        us_regression_fit_free(fit);
        us_prior_free(p);
    }
    assert!((beta[0] - 2.0).abs() < 0.05, "{beta:?}");
    assert!(beta[1].abs() < 0.05, "{beta:?}");
}

#[test]
fn header_lists_every_export() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/unishrink.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from the header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "unishrink.h"
int run(const double *s) {
    UsPrior *prior = 0;
    UsPrecisionFit *fit = 0;
    UsChainOptions opts = us_chain_options_default();
    if (us_prior_from_json("{\"family\":\"log\"}", &prior) != US_STATUS_OK) return 1;
    UsStatus st = us_fit_precision(prior, s, 2, 10.0, &opts, &fit);
    us_precision_fit_free(fit);
    us_prior_free(prior);
    return st == US_STATUS_OK ? 0 : (int)st;
}
"#,
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
