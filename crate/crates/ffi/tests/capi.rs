use std::ffi::{CStr, CString};
use std::ptr;

use koopman_roa_ffi::*;

const EXAMPLE1: &str = r#"{
  "system": {"builtin": {"name": "example1"}},
  "basis": {"kind": "monomial", "degree": 3},
  "validator": {"kind": "sos", "sigma1_degree": 4, "sigma2_degree": 4},
  "seed": 1
}"#;

fn certify(json: &str) -> (KrStatus, *mut KrCertificate) {
    let c = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    let s = unsafe { kr_certify_json(c.as_ptr(), &mut out) };
    (s, out)
}

fn last_error() -> String {
    let p = kr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn certify_inspect_and_round_trip() {
    let (s, cert) = certify(EXAMPLE1);
    assert_eq!(s, KrStatus::Ok);
    unsafe {
        assert!(kr_certificate_is_certified(cert));
        assert_eq!(kr_certificate_dim(cert), 2);
        let (mut g1, mut g2) = (f64::NAN, f64::NAN);
        assert_eq!(kr_certificate_levels(cert, &mut g1, &mut g2), KrStatus::Ok);
        assert_eq!(g1, 0.0);
        assert!(g2 > 0.0);
        let mut v = f64::NAN;
        assert_eq!(kr_certificate_eval(cert, [0.0, 0.0].as_ptr(), 2, &mut v), KrStatus::Ok);
        assert!(v.abs() < 1e-12);
        assert_eq!(kr_certificate_eval(cert, [0.0].as_ptr(), 1, &mut v), KrStatus::Incompatible);

        let json = kr_certificate_to_json(cert);
        assert!(!json.is_null());
        let mut back = ptr::null_mut();
        assert_eq!(kr_certificate_from_json(json, &mut back), KrStatus::Ok);
        let mut g2b = 0.0;
        kr_certificate_levels(back, &mut g1, &mut g2b);
        assert_eq!(g2, g2b);

        let list = [cert as *const KrCertificate, back as *const KrCertificate];
        let mut comb = ptr::null_mut();
        assert_eq!(kr_combine(list.as_ptr(), 2, 1000, 0, &mut comb, ptr::null_mut(), 0), KrStatus::Ok);
        assert!(kr_combined_contains(comb, [0.1, 0.1].as_ptr(), 2));
        assert!(!kr_combined_contains(comb, [5.0, 5.0].as_ptr(), 2));
        kr_combined_free(comb);

        kr_string_free(json);
        kr_certificate_free(back);
        kr_certificate_free(cert);
    }
}

#[test]
fn errors_are_reported_with_codes() {
    let (s, cert) = certify("{\"system\": 1}");
    assert_eq!(s, KrStatus::InvalidConfig);
    assert!(cert.is_null());
    assert!(last_error().contains("system"));

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { kr_certify_json(ptr::null(), &mut out) }, KrStatus::NullArgument);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { kr_certify_json(bad.as_ptr().cast(), &mut out) }, KrStatus::InvalidUtf8);
    assert_eq!(unsafe { kr_combine(ptr::null(), 0, 10, 0, &mut ptr::null_mut(), ptr::null_mut(), 0) }, KrStatus::NullArgument);
    let none: [*const KrCertificate; 0] = [];
    let mut comb = ptr::null_mut();
    assert_eq!(unsafe { kr_combine(none.as_ptr(), 0, 10, 0, &mut comb, ptr::null_mut(), 0) }, KrStatus::Incompatible);

    unsafe {
        kr_certificate_free(ptr::null_mut());
        kr_combined_free(ptr::null_mut());
        kr_string_free(ptr::null_mut());
        assert!(!kr_certificate_is_certified(ptr::null()));
        assert!(kr_certificate_to_json(ptr::null()).is_null());
    }
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(kr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/koopman_roa.h")).unwrap();
    for name in ["kr_certify_json", "kr_combine", "kr_certificate_free", "kr_last_error_message", "KR_STATUS_NESTING_VIOLATED", "KrCertificate"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-"])
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .stdin(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut child| {
            use std::io::Write;
            child.stdin.take().unwrap().write_all(b"#include \"koopman_roa.h\"\nint main(void) { return KR_STATUS_OK; }\n")?;
            child.wait()
        })
    else {
        eprintln!("no C compiler available; skipped");
        return;
    };
    assert!(status.success());
}
