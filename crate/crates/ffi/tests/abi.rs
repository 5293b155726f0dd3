use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use ghostlidar_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { gl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn preset_geometry_and_snr() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(gl_scenario_paper_preset(GlSourceKind::Pseudothermal, 1.0, &mut s), GlStatus::Ok);
        let mut g = GlGeometry::default();
        assert_eq!(gl_derive_geometry(s, &mut g), GlStatus::Ok);
        assert!((g.rho_l - 0.05 / std::f64::consts::PI).abs() < 1e-15);
        assert!((g.a_l - 10.0).abs() < 1e-12);
        assert!(g.rho_s.is_finite() && g.rho_s > 0.0);

        assert_eq!(gl_scenario_set_turbulence(s, 0.0, 0.0, 0.0), GlStatus::Ok);
        assert_eq!(gl_derive_geometry(s, &mut g), GlStatus::Ok);
        assert!(g.rho_r.is_infinite());
        assert_eq!(gl_scenario_set_integration_time(s, 1e4), GlStatus::Ok);
        let mut out = GlSnr::default();
        assert_eq!(gl_snr(s, 50.0, &mut out), GlStatus::Ok);
        assert!(out.total > 0.0 && out.total <= out.saturation * (1.0 + 1e-9));
        assert!((out.saturation - 3.26).abs() < 0.0326);
        gl_scenario_free(s);
    }
}

#[test]
fn gamma_limits() {
    let mut g = 0.0;
    unsafe {
        assert_eq!(gl_speckle_gamma(1e-4, &mut g), GlStatus::Ok);
        assert!((0.99..=1.0).contains(&g));
        assert_eq!(gl_speckle_gamma(100.0, &mut g), GlStatus::Ok);
        assert!((200.0 * g - 1.0).abs() <= 0.05);
        assert_eq!(gl_speckle_gamma(-1.0, &mut g), GlStatus::Domain);
    }
    assert!(!last_error().is_empty());
}

#[test]
fn errors_map_to_codes() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(gl_scenario_paper_preset(GlSourceKind::Spdc, 1.0, ptr::null_mut()), GlStatus::NullPointer);
        assert_eq!(gl_derive_geometry(ptr::null(), &mut GlGeometry::default()), GlStatus::NullPointer);
        let bad = CString::new("{ not json").unwrap();
        assert_eq!(gl_scenario_from_json(bad.as_ptr(), &mut s), GlStatus::Parse);
        assert!(s.is_null());
        let invalid = [0xffu8 as c_char, 0];
        assert_eq!(gl_scenario_from_json(invalid.as_ptr(), &mut s), GlStatus::InvalidUtf8);

        assert_eq!(gl_scenario_paper_preset(GlSourceKind::Spdc, 1.0, &mut s), GlStatus::Ok);
        assert_eq!(gl_scenario_set_integration_time(s, -1.0), GlStatus::Domain);
        assert!(!last_error().is_empty());
        gl_scenario_free(s);
        gl_scenario_free(ptr::null_mut());
        assert_eq!(gl_report_passed(ptr::null()), -1);
        assert!(gl_report_json(ptr::null()).is_null());
        gl_report_free(ptr::null_mut());
    }
}

#[test]
fn scenario_json_round_trip() {
    let json = serde_json::to_string(&ghostlidar::scenario::Scenario::paper_preset(
        ghostlidar::scenario::SourceKind::Computational,
        1e4,
    ))
    .unwrap();
    let c = CString::new(json).unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(gl_scenario_from_json(c.as_ptr(), &mut s), GlStatus::Ok);
        let mut g = GlGeometry::default();
        assert_eq!(gl_derive_geometry(s, &mut g), GlStatus::Ok);
        assert!((g.brightness_omega / 1e4 - 1.0).abs() < 1e-12);
        gl_scenario_free(s);
    }
}

#[test]
fn analytic_experiment_report() {
    let config = ghostlidar::harness::ExperimentConfig::preset(ghostlidar::harness::ExperimentKind::AnalyticSweep);
    let c = CString::new(serde_json::to_string(&config).unwrap()).unwrap();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(gl_run_experiment(c.as_ptr(), &mut r), GlStatus::Ok);
        assert_eq!(gl_report_passed(r), 1);
        let json = CStr::from_ptr(gl_report_json(r)).to_str().unwrap();
        let v: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(v["experiment"], "analytic-sweep");
        gl_report_free(r);
    }

    let mut bad = serde_json::to_value(&config).unwrap();
    bad["sweep"]["points"] = serde_json::json!(1);
    let c = CString::new(bad.to_string()).unwrap();
    let mut r = ptr::null_mut();
    let status = unsafe { gl_run_experiment(c.as_ptr(), &mut r) };
    assert_eq!(status, GlStatus::Config, "{}", last_error());
    assert!(r.is_null());
}

#[test]
fn header_declares_the_abi() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ghostlidar.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "typedef struct GlScenario GlScenario",
        "typedef struct GlReport GlReport",
        "GL_STATUS_OK = 0",
        "GL_STATUS_PANIC",
        "gl_last_error_message",
        "gl_scenario_paper_preset",
        "gl_scenario_from_json",
        "gl_derive_geometry",
        "gl_snr",
        "gl_speckle_gamma",
        "gl_run_experiment",
        "gl_report_json",
        "gl_report_free",
    ] {
        assert!(text.contains(sym), "missing {sym}");
    }
    // the header must be valid C on its own
    if let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    {
        assert!(status.success());
    }
}
