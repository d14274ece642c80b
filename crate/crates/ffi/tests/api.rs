use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use resilience_kit_ffi::*;
use serde_json::Value;

fn take_json(p: *mut std::ffi::c_char) -> Value {
    assert!(!p.is_null());
    let v = serde_json::from_str(unsafe { CStr::from_ptr(p) }.to_str().unwrap()).unwrap();
    unsafe { rk_string_free(p) };
    v
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rk_last_error_message()) }.to_str().unwrap().to_string()
}

fn scenario(name: &str) -> *mut RkSystem {
    let name = CString::new(name).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { rk_system_from_scenario(name.as_ptr(), &mut sys) }, RkStatus::Ok);
    sys
}

#[test]
fn temperature_round_trip() {
    let sys = scenario("temperature");
    let (mut n, mut k) = (0, 0);
    assert_eq!(unsafe { rk_system_dims(sys, &mut n, &mut k) }, RkStatus::Ok);
    assert_eq!((n, k), (3, 7));

    let lost = [3usize];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rk_check(sys, lost.as_ptr(), 1, &mut out) }, RkStatus::Ok);
    let v = take_json(out);
    assert_eq!(v["resiliently_stabilizable"], true);
    assert_eq!(v["resilient"], false);

    let x0 = [0.8, 0.7, 0.9];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rk_bounds(sys, lost.as_ptr(), 1, x0.as_ptr(), 20, 5, &mut out) }, RkStatus::Ok);
    let b = take_json(out);
    assert!(b["t_n"]["lower"].as_f64().unwrap() > 0.0);
    assert!(b["r_q"]["upper"].as_f64().unwrap() <= 1.0);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rk_reach(sys, lost.as_ptr(), 1, x0.as_ptr(), 10.0, 4, &mut out) }, RkStatus::Ok);
    let t = take_json(out);
    assert_eq!(t["sets"].as_array().unwrap().len(), 5);
    unsafe { rk_system_free(sys) };
}

#[test]
fn error_codes() {
    let sys = scenario("admire");
    let lost = [8usize];
    let x0 = [0.0; 9];
    let mut out = ptr::null_mut();
    let st = unsafe { rk_reach(sys, lost.as_ptr(), 1, x0.as_ptr(), 0.2, 5, &mut out) };
    assert_eq!(st, RkStatus::Hypothesis);
    assert!(out.is_null());
    assert!(last_error().contains("Z is empty"));

    let bad = [42usize];
    assert_eq!(unsafe { rk_check(sys, bad.as_ptr(), 1, &mut out) }, RkStatus::InvalidArgument);
    assert_eq!(unsafe { rk_check(sys, ptr::null(), 1, &mut out) }, RkStatus::NullPointer);
    assert_eq!(unsafe { rk_check(sys, lost.as_ptr(), 1, ptr::null_mut()) }, RkStatus::NullPointer);
    // ADMIRE is not Hurwitz, so no Lyapunov pairs exist.
    let ok = [0usize];
    let st = unsafe { rk_bounds(sys, ok.as_ptr(), 1, x0.as_ptr(), 5, 1, &mut out) };
    assert_eq!(st, RkStatus::Hypothesis);
    unsafe { rk_system_free(sys) };

    let unknown = CString::new("nope").unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { rk_system_from_scenario(unknown.as_ptr(), &mut sys) }, RkStatus::InvalidArgument);
    assert!(sys.is_null());
    assert!(last_error().contains("admire"));
    unsafe { rk_system_free(ptr::null_mut()) };
    unsafe { rk_string_free(ptr::null_mut()) };
}

#[test]
fn raw_matrices_and_json() {
    let a = [0.0, 1.0, 0.0, 0.0];
    let b = [0.0, 0.0, 1.0, 0.5];
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { rk_system_new(2, 2, a.as_ptr(), b.as_ptr(), &mut sys) }, RkStatus::Ok);
    let lost = [1usize];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rk_check(sys, lost.as_ptr(), 1, &mut out) }, RkStatus::Ok);
    assert_eq!(take_json(out)["resilient"], true);
    unsafe { rk_system_free(sys) };

    let nan = [f64::NAN, 0.0, 0.0, 0.0];
    let mut sys = ptr::null_mut();
    assert_ne!(unsafe { rk_system_new(2, 2, nan.as_ptr(), b.as_ptr(), &mut sys) }, RkStatus::Ok);
    assert!(sys.is_null());

    let json = CString::new(r#"{"name": "s", "A": [[-1]], "B_bar": [[1, 0.5]]}"#).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { rk_system_from_json(json.as_ptr(), &mut sys) }, RkStatus::Ok);
    unsafe { rk_system_free(sys) };
    let broken = CString::new("{").unwrap();
    assert_eq!(unsafe { rk_system_from_json(broken.as_ptr(), &mut sys) }, RkStatus::InvalidArgument);
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(rk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_parses_as_c_and_cpp() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("resilience_kit.h").exists());
    let dir = tempfile_dir();
    let src = dir.join("probe.c");
    std::fs::write(
        &src,
        "#include \"resilience_kit.h\"\nint main(void) { RkSystem *s = 0; return rk_system_free(s), RK_STATUS_OK; }\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let status = Command::new(compiler)
            .args(extra)
            .arg("-fsyntax-only")
            .arg("-Wall")
            .arg("-Werror")
            .arg("-I")
            .arg(&include)
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => eprintln!("{compiler} unavailable ({e}); header syntax not checked"),
        }
    }
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rk-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
