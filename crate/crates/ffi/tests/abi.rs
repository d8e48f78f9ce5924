use std::ffi::{CStr, CString};
use std::ptr;

use ergodic_explore_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ee_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn small_config() -> *mut EeConfig {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(ee_config_default(&mut cfg), EeStatus::Ok);
        for (k, v) in [
            ("grid.nx", "100"),
            ("grid.ny", "100"),
            ("max_steps", "300"),
            ("sim.snapshots", "[]"),
        ] {
            let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
            assert_eq!(
                ee_config_set(cfg, k.as_ptr(), v.as_ptr()),
                EeStatus::Ok,
                "{}",
                last_error()
            );
        }
    }
    cfg
}

#[test]
fn run_and_read_back() {
    let cfg = small_config();
    let mut trace = ptr::null_mut();
    unsafe {
        assert_eq!(ee_run(cfg, &mut trace), EeStatus::Ok);
        assert_eq!(ee_trace_position_count(trace), 301);
        let n = ee_trace_metric_count(trace);
        assert!(n >= 4);
        let (mut k, mut v, mut hole) = (0u64, 0.0f64, 0u32);
        assert_eq!(ee_trace_metric(trace, 0, &mut k, &mut v, &mut hole), EeStatus::Ok);
        assert_eq!((k, hole), (0, 1));
        assert!(v > 1.0);
        let mut last = 0.0;
        assert_eq!(
            ee_trace_metric(trace, n - 1, &mut k, &mut last, ptr::null_mut()),
            EeStatus::Ok
        );
        assert_eq!(k, 300);
        let mut fin = 0.0;
        assert_eq!(ee_trace_final_v(trace, &mut fin), EeStatus::Ok);
        assert_eq!(fin, last);
        assert!(fin < v);
        assert_eq!(
            ee_trace_metric(trace, n, &mut k, &mut v, &mut hole),
            EeStatus::OutOfRange
        );
        assert!(last_error().contains("metric"));

        let (mut x, mut y) = (0.0, 0.0);
        assert_eq!(ee_trace_position(trace, 0, &mut x, &mut y), EeStatus::Ok);
        assert_eq!((x, y), (180.0, 175.0));
        let mut buf = vec![0.0; 20];
        assert_eq!(ee_trace_positions(trace, buf.as_mut_ptr(), 10), 10);
        assert_eq!(&buf[..2], &[180.0, 175.0]);
        assert!(ee_trace_cycles(trace) >= 1);

        let dir = tempfile::tempdir().unwrap();
        let d = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(ee_trace_write(trace, d.as_ptr()), EeStatus::Ok);
        assert!(dir.path().join("metrics.csv").exists());
        assert!(dir.path().join("manifest.json").exists());

        ee_trace_free(trace);
        ee_config_free(cfg);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let cfg = small_config();
    unsafe {
        let (k, v) = (CString::new("v_max").unwrap(), CString::new("0").unwrap());
        assert_eq!(ee_config_set(cfg, k.as_ptr(), v.as_ptr()), EeStatus::InvalidConfig);
        assert!(last_error().contains("robot.v_max"));
        // The failed set left the config untouched.
        let mut text = ptr::null_mut();
        assert_eq!(ee_config_to_string(cfg, &mut text), EeStatus::Ok);
        assert_eq!(last_error(), "");
        let s = CStr::from_ptr(text).to_str().unwrap().to_string();
        ee_string_free(text);
        assert!(s.contains("robot.v_max = 10"));
        assert!(s.contains("grid.nx = 100"));

        let mut other = ptr::null_mut();
        let bad = CString::new("hole.1.weight = 0.5\n").unwrap();
        assert_eq!(ee_config_parse(bad.as_ptr(), &mut other), EeStatus::InvalidConfig);
        assert!(other.is_null());
        let missing = CString::new("/nonexistent/config.toml").unwrap();
        assert_eq!(ee_config_load(missing.as_ptr(), &mut other), EeStatus::InvalidConfig);
        assert_eq!(ee_config_parse(ptr::null(), &mut other), EeStatus::NullArgument);
        assert_eq!(ee_run(ptr::null(), &mut ptr::null_mut()), EeStatus::NullArgument);
        assert_eq!(ee_trace_metric_count(ptr::null()), 0);
        ee_config_free(ptr::null_mut());
        ee_trace_free(ptr::null_mut());
        ee_config_free(cfg);
    }
}

#[test]
fn parse_text_and_version() {
    let text = CString::new(ergodic_explore::THREE_HOLE_CONFIG).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(ee_config_parse(text.as_ptr(), &mut cfg), EeStatus::Ok);
        ee_config_free(cfg);
        let v = CStr::from_ptr(ee_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/ergodic_explore.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "ee_run",
        "ee_config_set",
        "ee_trace_final_v",
        "ee_last_error",
        "EE_STATUS_OUT_OF_RANGE",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let status = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
}
