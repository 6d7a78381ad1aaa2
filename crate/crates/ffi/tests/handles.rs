use std::ffi::{CStr, CString};
use std::ptr;

use netembed_ffi::*;

fn flat2() -> *mut NetembedScenario {
    let path = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios/flat2.cfg")).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { netembed_scenario_load(path.as_ptr(), &mut h) };
    assert_eq!(s, NetembedStatus::Ok);
    h
}

#[test]
fn flat_scenario_round_trip() {
    let h = flat2();
    unsafe {
        assert_eq!(netembed_scenario_dim(h), 2);

        let mut c = [0.0; 4];
        assert_eq!(netembed_scenario_constants(h, c.as_mut_ptr()), NetembedStatus::Ok);
        assert_eq!(c[0], 1.0);
        assert_eq!(c[1], 0.75);

        let x = [0.3, -1.7];
        let mut y = [0.0; 2];
        assert_eq!(netembed_phi(h, x.as_ptr(), 2, y.as_mut_ptr()), NetembedStatus::Ok);
        assert!((y[0] - 0.3).abs() < 1e-9 && (y[1] + 1.7).abs() < 1e-9);

        let (a, b) = ([0.0, 0.0], [3.0, 4.0]);
        let mut d = 0.0;
        assert_eq!(netembed_distance(h, a.as_ptr(), b.as_ptr(), 2, &mut d), NetembedStatus::Ok);
        assert!((d - 5.0).abs() < 1e-9);

        let sub = CString::new("audit").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(netembed_run(h, sub.as_ptr(), true, 5, &mut r), NetembedStatus::Ok);
        assert!(netembed_report_passed(r));
        assert!(!netembed_report_hypothesis_violated(r));
        assert_eq!(netembed_report_check_count(r), 2);
        let json = CStr::from_ptr(netembed_report_json(r)).to_str().unwrap();
        let v: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(v["subcommand"], "audit");
        netembed_report_free(r);
        netembed_scenario_free(h);
    }
}

#[test]
fn errors_map_to_codes() {
    let h = flat2();
    unsafe {
        let x = [0.0; 3];
        let mut y = [0.0; 3];
        assert_eq!(netembed_phi(h, x.as_ptr(), 3, y.as_mut_ptr()), NetembedStatus::InvalidArgument);
        assert!(!netembed_last_error().is_null());

        let bad = CString::new("bogus").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(netembed_run(h, bad.as_ptr(), false, 0, &mut r), NetembedStatus::Config);
        assert!(r.is_null());
        netembed_scenario_free(h);

        let missing = CString::new("/nonexistent/scenario.cfg").unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(netembed_scenario_load(missing.as_ptr(), &mut h), NetembedStatus::Io);
        assert!(h.is_null());
        assert_eq!(netembed_scenario_dim(ptr::null()), 0);
        assert!(!netembed_report_passed(ptr::null()));
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/netembed.h")).unwrap();
    for f in [
        "netembed_last_error",
        "netembed_scenario_load",
        "netembed_scenario_free",
        "netembed_scenario_dim",
        "netembed_scenario_constants",
        "netembed_phi",
        "netembed_distance",
        "netembed_gamma",
        "netembed_run",
        "netembed_report_passed",
        "netembed_report_hypothesis_violated",
        "netembed_report_check_count",
        "netembed_report_json",
        "netembed_report_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("size_t netembed_scenario_dim"));
}
