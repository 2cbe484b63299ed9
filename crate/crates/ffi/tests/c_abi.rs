use std::f64::consts::PI;
use std::ffi::{c_char, CString};
use std::ptr;

use airy_flow_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let len = unsafe { af_last_error_message(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    buf.truncate(len.min(255));
    String::from_utf8(buf).unwrap()
}

fn new_solver(shape: &str, params: &[f64], n: usize, dt: f64, scheme: &str) -> (AfStatus, *mut AfSolver) {
    let shape = CString::new(shape).unwrap();
    let scheme = CString::new(scheme).unwrap();
    let mut h = ptr::null_mut();
    let status = unsafe {
        af_solver_new(
            shape.as_ptr(),
            params.as_ptr(),
            params.len(),
            n,
            dt,
            scheme.as_ptr(),
            ptr::null(),
            &mut h,
        )
    };
    (status, h)
}

#[test]
fn circle_round_trip_through_the_abi() {
    let (status, h) = new_solver("circle", &[2.0], 64, 1e-3, "cn");
    assert_eq!(status, AfStatus::Ok, "{}", last_error());
    unsafe {
        assert_eq!(af_solver_advance(h, 100), AfStatus::Ok);
        let (mut t, mut n) = (0.0, 0usize);
        assert_eq!(af_solver_info(h, &mut t, &mut n), AfStatus::Ok);
        assert!((t - 0.1).abs() < 1e-12);
        assert_eq!(n, 64);

        let mut k = vec![0.0; 64];
        assert_eq!(af_solver_curvature(h, k.as_mut_ptr(), k.len()), AfStatus::Ok);
        assert!(k.iter().all(|v| (v - 0.5).abs() < 1e-10));

        let (mut x, mut y) = (vec![0.0; 64], vec![0.0; 64]);
        assert_eq!(af_solver_points(h, x.as_mut_ptr(), y.as_mut_ptr(), 64), AfStatus::Ok);
        assert!(x.iter().zip(&y).all(|(a, b)| (a.hypot(*b) - 2.0).abs() < 1e-10));

        let mut c = [0.0; 3];
        assert_eq!(af_solver_conserved(h, c.as_mut_ptr()), AfStatus::Ok);
        assert!((c[0] - 2.0 * PI).abs() < 1e-10);
        assert!((c[1] - PI).abs() < 1e-10);
        assert!((c[2] + PI / 32.0).abs() < 1e-10);

        assert_eq!(af_solver_curvature(h, k.as_mut_ptr(), 10), AfStatus::BufferTooSmall);
        assert!(last_error().contains("64"));
        af_solver_free(h);
    }
}

#[test]
fn bad_arguments_are_reported() {
    let (status, h) = new_solver("circle", &[1.0], 64, 1e-3, "rk4");
    assert_eq!(status, AfStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(last_error().contains("rk4"));

    let (status, _) = new_solver("ellipse", &[1.0], 64, 1e-3, "cn");
    assert_eq!(status, AfStatus::InvalidArgument);
    let (status, _) = new_solver("e3", &[], 64, 0.0, "cn");
    assert_eq!(status, AfStatus::InvalidArgument);

    unsafe {
        assert_eq!(af_solver_advance(ptr::null_mut(), 1), AfStatus::NullPointer);
        assert_eq!(
            af_solver_info(ptr::null(), ptr::null_mut(), ptr::null_mut()),
            AfStatus::NullPointer
        );
        af_solver_free(ptr::null_mut());
        let mut out = ptr::null_mut();
        let status = af_solver_new(
            ptr::null(),
            ptr::null(),
            0,
            64,
            1e-3,
            ptr::null(),
            ptr::null(),
            &mut out,
        );
        assert_eq!(status, AfStatus::NullPointer);
    }
}

#[test]
fn blow_up_is_a_status() {
    // Unfiltered ADB on E3 at this step size is unstable.
    let (status, h) = new_solver("e3", &[], 256, 1e-3, "adb");
    assert_eq!(status, AfStatus::Ok);
    unsafe {
        assert_eq!(af_solver_advance(h, 100_000), AfStatus::BlowUp);
        assert!(last_error().contains("blew up"), "{}", last_error());
        af_solver_free(h);
    }
}

#[test]
fn run_config_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = CString::new(
        "[shape]\nname = \"circle\"\nradius = 1.0\n[run]\nn = 32\ndt = 1e-3\nt_final = 0.01\nscheme = \"adb\"\n",
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(
            af_run_config(text.as_ptr(), out.as_ptr()),
            AfStatus::Ok,
            "{}",
            last_error()
        );
        let bad = CString::new("[shape\nname = 1").unwrap();
        assert_eq!(af_run_config(bad.as_ptr(), out.as_ptr()), AfStatus::ParseError);
        assert!(last_error().contains("line 1"), "{}", last_error());
    }
    assert!(dir.path().join("diagnostics.csv").exists());
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/airy_flow.h");
    for name in [
        "af_solver_new",
        "af_solver_free",
        "af_solver_advance",
        "af_solver_info",
        "af_solver_curvature",
        "af_solver_points",
        "af_solver_conserved",
        "af_run_config",
        "af_last_error_message",
        "AF_STATUS_BLOW_UP",
        "typedef struct AfSolver AfSolver",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
