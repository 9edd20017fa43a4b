use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use cbre_ffi::*;

const FELLER: &str = r#"{
  "branching": { "b": 0.0, "gamma": 1.0 },
  "environment": { "d": 0.0, "sigma": 1.0 },
  "competition": { "kind": "logistic", "c": 1.0 }
}"#;

fn load(json: &str) -> *mut CbreModel {
    let s = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cbre_model_from_json(s.as_ptr(), &mut m) }, CbreStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = cbre_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { cbre_string_free(s) };
    out
}

#[test]
fn classify_round_trips_through_json() {
    let m = load(FELLER);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cbre_classify_json(m, &mut out) }, CbreStatus::Ok);
    let doc: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(doc["extinction"]["value"]["extinct_as"], true);
    unsafe { cbre_model_free(m) };
}

#[test]
fn scalar_quantities_match_the_library() {
    let m = load(FELLER);
    let spec: cbre::mechanisms::ModelSpec = serde_json::from_str(FELLER).unwrap();
    let lm = cbre::logistic_analytics::LogisticModel::from_model(&spec).unwrap();
    let mut v = f64::NAN;
    assert_eq!(unsafe { cbre_mean_extinction_time(m, 1.0, &mut v) }, CbreStatus::Ok);
    assert_eq!(v, cbre::logistic_analytics::mean_t0(&lm, 1.0).unwrap());
    assert_eq!(unsafe { cbre_laplace_hitting_time(m, 1.0, 0.0, 1.0, &mut v) }, CbreStatus::Ok);
    assert_eq!(v, cbre::logistic_analytics::laplace_ta_logistic(&lm, 1.0, 0.0, 1.0).unwrap());
    assert!(v > 0.0 && v < 1.0);
    assert_eq!(unsafe { cbre_hitting_prob(m, 1.0, 2.0, &mut v) }, CbreStatus::Ok);
    assert!(v > 0.0 && v < 1.0);
    unsafe { cbre_model_free(m) };
}

#[test]
fn simulate_is_deterministic() {
    let m = load(FELLER);
    let cfg = CString::new(r#"{ "schema_version": 1, "simulation": { "dt": 0.01, "t_max": 10.0, "n_paths": 100, "seed": 3 }, "analytics": { "lambdas": [1.0], "levels": [0.0], "x0s": [1.0] } }"#).unwrap();
    let run = || {
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { cbre_simulate_json(m, cfg.as_ptr(), &mut out) }, CbreStatus::Ok, "{}", last_error());
        take(out)
    };
    let a = run();
    assert_eq!(a, run());
    let doc: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(doc["estimates"][0]["hitting"]["n_paths"], 100);
    unsafe { cbre_model_free(m) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cbre_model_from_json(ptr::null(), &mut m) }, CbreStatus::NullPointer);
    let bad = CString::new(r#"{ "environment": { "d": 0.0, "sigma": 1.0 }, "competition": { "kind": "none" } }"#).unwrap();
    assert_eq!(unsafe { cbre_model_from_json(bad.as_ptr(), &mut m) }, CbreStatus::Malformed);
    assert!(m.is_null());
    assert!(last_error().contains("branching"));

    let handle = load(FELLER);
    assert!(cbre_last_error().is_null(), "success clears the message");
    let mut v = 0.0;
    assert_eq!(unsafe { cbre_hitting_prob(handle, 3.0, 2.0, &mut v) }, CbreStatus::Domain);
    assert_eq!(unsafe { cbre_hitting_prob(handle, 1.0, 2.0, ptr::null_mut()) }, CbreStatus::NullPointer);
    assert_eq!(unsafe { cbre_mean_extinction_time(ptr::null(), 1.0, &mut v) }, CbreStatus::NullPointer);
    unsafe { cbre_model_free(handle) };

    // the diffusion route needs a jump-free model
    let jumps = load(r#"{ "branching": { "b": 0.0, "gamma": 1.0, "mu": { "family": "compound_poisson", "rate": 1.0, "jumps": { "law": "atoms", "atoms": [[1.0, 1.0]] } } }, "environment": { "d": 0.0, "sigma": 0.0 }, "competition": { "kind": "logistic", "c": 1.0 } }"#);
    let st = unsafe { cbre_hitting_prob(jumps, 1.0, 2.0, &mut v) };
    assert_ne!(st, CbreStatus::Ok);
    assert!(!last_error().is_empty());
    unsafe { cbre_model_free(jumps) };
}

#[test]
fn null_frees_are_ignored_and_version_is_set() {
    unsafe {
        cbre_model_free(ptr::null_mut());
        cbre_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(cbre_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_json_round_trip() {
    let m = load(FELLER);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cbre_model_to_json(m, &mut out) }, CbreStatus::Ok);
    let again = load(&take(out));
    unsafe {
        cbre_model_free(m);
        cbre_model_free(again);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cbre.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["cbre_model_from_json", "cbre_model_free", "cbre_classify_json", "cbre_simulate_json", "cbre_string_free", "CBRE_STATUS_OK"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(status.success());
}
