use cuspwave_ffi::*;
use std::ffi::CString;
use std::ptr;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { cw_last_error(buf.as_mut_ptr(), buf.len()) };
    let s: Vec<u8> = buf.iter().take(n.min(255)).map(|c| *c as u8).collect();
    String::from_utf8(s).unwrap()
}

#[test]
fn domain_round_trip_and_validation() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(cw_domain_new_quadratic(1.0, 30.0, &mut d), CwStatus::Ok);
        let (mut xi, mut eta, mut x, mut y) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(cw_domain_inverse(d, 3.0, 0.25, &mut x, &mut y), CwStatus::Ok);
        assert!((x - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(cw_domain_forward(d, x, y, &mut xi, &mut eta), CwStatus::Ok);
        assert!((xi - 3.0).abs() < 1e-9 && (eta - 0.25).abs() < 1e-9);
        let (mut pass, mut mask) = (0, 0u32);
        assert_eq!(cw_domain_validate(d, &mut pass, &mut mask), CwStatus::Ok);
        assert_eq!((pass, mask), (1, 0));
        cw_domain_free(d);

        let (c1, c2) = ([0.0, 1.0], [0.0, -1.0]);
        let mut l = ptr::null_mut();
        let st = cw_domain_new_polynomial(1.0, c1.as_ptr(), 2, c2.as_ptr(), 2, 5.0, &mut l);
        if st == CwStatus::Ok {
            assert_eq!(cw_domain_validate(l, &mut pass, &mut mask), CwStatus::Ok);
            assert_eq!(pass, 0);
            assert!(mask & 0b100 != 0);
            cw_domain_free(l);
        } else {
            assert_eq!(st, CwStatus::Domain, "{}", last_error());
        }
    }
}

#[test]
fn null_pointers_and_errors_are_reported() {
    unsafe {
        assert_eq!(cw_domain_new_quadratic(1.0, 30.0, ptr::null_mut()), CwStatus::NullPointer);
        assert!(last_error().contains("null pointer"));
        let mut d = ptr::null_mut();
        assert_ne!(cw_domain_new_quadratic(-1.0, 30.0, &mut d), CwStatus::Ok);
        assert!(d.is_null());
        cw_domain_free(ptr::null_mut());
        let mut c = ptr::null_mut();
        let bad = CString::new("[problem]\ntheta = 2.0\n").unwrap();
        assert_eq!(cw_config_parse(bad.as_ptr(), &mut c), CwStatus::Config);
        assert!(last_error().contains("theta"));
    }
}

#[test]
fn green_kernel_and_scalar_solution() {
    unsafe {
        let n = 12 * 2 + 1;
        let mut nodes = vec![0.0; n];
        let f_re = vec![1.0; n];
        let f_im = vec![0.0; n];
        let (mut u_re, mut u_im) = (vec![0.0; n], vec![0.0; n]);
        let st = cw_resolvent_h(1.0, 0.0, 2, nodes.as_mut_ptr(), f_re.as_ptr(), f_im.as_ptr(), u_re.as_mut_ptr(), u_im.as_mut_ptr());
        assert_eq!(st, CwStatus::Ok);
        let a = (-1.0f64).exp() - 0.5 * (-2.0f64).exp();
        assert!((u_re[0] - (a - 0.5)).abs() < 1e-8);
        assert_eq!(nodes[n - 1], 1.0);
        let st = cw_resolvent_h(-1.0, 0.0, 2, nodes.as_mut_ptr(), f_re.as_ptr(), f_im.as_ptr(), u_re.as_mut_ptr(), u_im.as_mut_ptr());
        assert_eq!(st, CwStatus::InvalidArgument);

        let m = 33;
        let f = vec![1.0; m];
        let (mut w_re, mut w_im) = (vec![0.0; m], vec![0.0; m]);
        assert_eq!(cw_scalar_solve(1.0, 0.0, m, f.as_ptr(), w_re.as_mut_ptr(), w_im.as_mut_ptr()), CwStatus::Ok);
        let e = std::f64::consts::E;
        assert!((w_re[0] + 2.0 / (3.0 * (1.0 + e))).abs() < 1e-10);
        assert!((w_re[m - 1] + 2.0 * e / (3.0 * (1.0 + e))).abs() < 1e-10);
    }
}

#[test]
fn config_and_cli_entry() {
    unsafe {
        let mut c = ptr::null_mut();
        let t = CString::new("[problem]\nlambda = 2.5\n").unwrap();
        assert_eq!(cw_config_parse(t.as_ptr(), &mut c), CwStatus::Ok);
        let (mut l, mut p, mut th) = (0.0, 0.0, 0.0);
        assert_eq!(cw_config_problem(c, &mut l, &mut p, &mut th), CwStatus::Ok);
        assert_eq!((l, p, th), (2.5, 2.0, 0.5));
        cw_config_free(c);

        let dir = tempfile::tempdir().unwrap();
        let args: Vec<CString> = ["cuspwave", "validate-domain", "-o", dir.path().to_str().unwrap()]
            .iter()
            .map(|s| CString::new(*s).unwrap())
            .collect();
        let ptrs: Vec<*const std::ffi::c_char> = args.iter().map(|s| s.as_ptr()).collect();
        assert_eq!(cw_run(ptrs.len() as i32, ptrs.as_ptr()), 0);
        assert_eq!(cw_run(0, ptr::null()), 2);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cuspwave.h")).unwrap();
    for name in ["cw_domain_new_quadratic", "cw_domain_free", "cw_scalar_solve", "cw_run", "cw_last_error", "CwStatus", "CwDomain"] {
        assert!(h.contains(name), "{name}");
    }
}
