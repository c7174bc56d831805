//! C ABI over the cuspwave library: opaque handles, status codes and a
//! thread-local last-error message.

use cuspwave::cli::RunConfig;
use cuspwave::geometry::{validate_profiles, CuspDomain, ProfilePair};
use cuspwave::grid::time_line;
use cuspwave::resolvent::{resolvent_h, SpectralParam};
use cuspwave::panel::{NodeKind, PanelLine};
use cuspwave::time_calculus::scalar_solve_exact;
use cuspwave::{CuspError, C64};
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    ContourCollision = 4,
    Numerical = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

/// Cusp domain handle.
pub struct CwDomain {
    inner: CuspDomain,
}

/// Run-configuration handle.
pub struct CwConfig {
    inner: RunConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &CuspError) -> CwStatus {
    match e {
        CuspError::Domain(_) | CuspError::CuspPoint { .. } | CuspError::ProfileEval { .. } | CuspError::BeyondTruncation { .. } => {
            CwStatus::Domain
        }
        CuspError::ContourCollision { .. } => CwStatus::ContourCollision,
        CuspError::Invalid(_) | CuspError::BranchCut(_) | CuspError::GridMismatch | CuspError::TooFewFrames { .. } => {
            CwStatus::InvalidArgument
        }
        CuspError::Config(_) => CwStatus::Config,
        CuspError::Io(_) => CwStatus::Io,
        _ => CwStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), CuspError>>(f: F) -> CwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CwStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside cuspwave".into());
            CwStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(format!("null pointer: {}", stringify!($p)));
            return CwStatus::NullPointer;
        })+
    };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cw_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let m = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = m.len().min(len - 1);
            std::ptr::copy_nonoverlapping(m.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        m.len()
    })
}

/// Creates the domain between phi1 = x^2 and phi2 = -x^2 on (0, a], truncated at xi_max.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free with `cw_domain_free`.
#[no_mangle]
pub unsafe extern "C" fn cw_domain_new_quadratic(a: f64, xi_max: f64, out: *mut *mut CwDomain) -> CwStatus {
    non_null!(out);
    guard(|| {
        let d = CuspDomain::new(ProfilePair::quadratic_symmetric(a), xi_max)?;
        *out = Box::into_raw(Box::new(CwDomain { inner: d }));
        Ok(())
    })
}

/// Creates a domain from monomial coefficients of phi1 and phi2.
///
/// # Safety
/// `c1`/`c2` must point to `n1`/`n2` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cw_domain_new_polynomial(
    a: f64,
    c1: *const f64,
    n1: usize,
    c2: *const f64,
    n2: usize,
    xi_max: f64,
    out: *mut *mut CwDomain,
) -> CwStatus {
    non_null!(c1, c2, out);
    guard(|| {
        let p1 = std::slice::from_raw_parts(c1, n1).to_vec();
        let p2 = std::slice::from_raw_parts(c2, n2).to_vec();
        let d = CuspDomain::new(ProfilePair::polynomial(a, p1, p2), xi_max)?;
        *out = Box::into_raw(Box::new(CwDomain { inner: d }));
        Ok(())
    })
}

/// Releases a domain handle (null is ignored).
///
/// # Safety
/// `d` must be null or a handle from `cw_domain_new_*` not freed before.
#[no_mangle]
pub unsafe extern "C" fn cw_domain_free(d: *mut CwDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Checks the four profile conditions; `pass` receives 1 or 0 and
/// `failed_mask` bit k-1 is set when condition k fails.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cw_domain_validate(d: *const CwDomain, pass: *mut c_int, failed_mask: *mut u32) -> CwStatus {
    non_null!(d, pass, failed_mask);
    guard(|| {
        let v = validate_profiles(&(*d).inner.profiles, 64, 1e-12)?;
        *pass = v.pass() as c_int;
        *failed_mask = v.rows.iter().filter(|r| !r.pass).fold(0u32, |m, r| m | 1 << (r.condition - 1));
        Ok(())
    })
}

/// (x, y) in the cusp domain to strip coordinates (xi, eta).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cw_domain_forward(d: *const CwDomain, x: f64, y: f64, xi: *mut f64, eta: *mut f64) -> CwStatus {
    non_null!(d, xi, eta);
    guard(|| {
        let (a, b) = (*d).inner.forward_map(x, y)?;
        *xi = a;
        *eta = b;
        Ok(())
    })
}

/// Strip coordinates (xi, eta) to (x, y).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cw_domain_inverse(d: *const CwDomain, xi: f64, eta: f64, x: *mut f64, y: *mut f64) -> CwStatus {
    non_null!(d, x, y);
    guard(|| {
        let (a, b) = (*d).inner.inverse_map(xi, eta)?;
        *x = a;
        *y = b;
        Ok(())
    })
}

/// (H - mu)^{-1} f on [0,1] with Robin data at 0 and Dirichlet data at 1,
/// sampled on `panels` uniform Chebyshev panels of 13 nodes. `nodes`, `f_re`,
/// `f_im`, `u_re`, `u_im` hold 12 * panels + 1 values; `nodes` is written.
///
/// # Safety
/// Every array pointer must reference 12 * panels + 1 doubles.
#[no_mangle]
pub unsafe extern "C" fn cw_resolvent_h(
    mu_re: f64,
    mu_im: f64,
    panels: usize,
    nodes: *mut f64,
    f_re: *const f64,
    f_im: *const f64,
    u_re: *mut f64,
    u_im: *mut f64,
) -> CwStatus {
    non_null!(nodes, f_re, f_im, u_re, u_im);
    guard(|| {
        if panels == 0 || panels > 4096 {
            return Err(CuspError::Invalid("panels must lie in 1..=4096".into()));
        }
        let line = PanelLine::uniform(1.0, panels, 13, NodeKind::Chebyshev);
        let n = line.len();
        let (fr, fi) = (std::slice::from_raw_parts(f_re, n), std::slice::from_raw_parts(f_im, n));
        let f: Vec<C64> = fr.iter().zip(fi).map(|(a, b)| C64::new(*a, *b)).collect();
        let u = resolvent_h(&SpectralParam::new(C64::new(mu_re, mu_im))?, &line, &f)?;
        std::slice::from_raw_parts_mut(nodes, n).copy_from_slice(&line.nodes);
        for (k, v) in u.iter().enumerate() {
            *u_re.add(k) = v.re;
            *u_im.add(k) = v.im;
        }
        Ok(())
    })
}

/// Solves w'' - z w = f on [0,1] with w'' + w' + w = 0 at both ends, on `n`
/// uniform nodes t_k = k/(n-1) (n odd, n >= 5). Real data, complex z.
///
/// # Safety
/// `f`, `w_re`, `w_im` must reference `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn cw_scalar_solve(
    z_re: f64,
    z_im: f64,
    n: usize,
    f: *const f64,
    w_re: *mut f64,
    w_im: *mut f64,
) -> CwStatus {
    non_null!(f, w_re, w_im);
    guard(|| {
        if n < 5 || n % 2 == 0 {
            return Err(CuspError::Invalid("n must be odd and at least 5".into()));
        }
        let tl = time_line(n);
        let fv: Vec<C64> = std::slice::from_raw_parts(f, n).iter().map(|v| C64::new(*v, 0.0)).collect();
        let s = scalar_solve_exact(C64::new(z_re, z_im), &tl, &fv)?;
        for (k, v) in s.w.iter().enumerate() {
            *w_re.add(k) = v.re;
            *w_im.add(k) = v.im;
        }
        Ok(())
    })
}

/// Parses a TOML run configuration (validated).
///
/// # Safety
/// `text` must be a NUL-terminated UTF-8 string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cw_config_parse(text: *const c_char, out: *mut *mut CwConfig) -> CwStatus {
    non_null!(text, out);
    guard(|| {
        let s = CStr::from_ptr(text).to_str().map_err(|e| CuspError::Config(e.to_string()))?;
        *out = Box::into_raw(Box::new(CwConfig { inner: RunConfig::parse(s)? }));
        Ok(())
    })
}

/// Reads the problem parameters of a configuration.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cw_config_problem(c: *const CwConfig, lambda: *mut f64, p: *mut f64, theta: *mut f64) -> CwStatus {
    non_null!(c, lambda, p, theta);
    let pr = (*c).inner.problem;
    *lambda = pr.lambda;
    *p = pr.p;
    *theta = pr.theta;
    CwStatus::Ok
}

/// Releases a configuration handle (null is ignored).
///
/// # Safety
/// `c` must be null or a handle from `cw_config_parse` not freed before.
#[no_mangle]
pub unsafe extern "C" fn cw_config_free(c: *mut CwConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Runs one CLI command; returns its exit status (0 pass, 1 fail, 2 usage).
///
/// # Safety
/// `argv` must reference `argc` NUL-terminated strings, argv[0] being the program name.
#[no_mangle]
pub unsafe extern "C" fn cw_run(argc: c_int, argv: *const *const c_char) -> c_int {
    if argv.is_null() || argc < 1 {
        set_error("argv must hold at least the program name".into());
        return 2;
    }
    let mut args = Vec::with_capacity(argc as usize);
    for k in 0..argc as usize {
        let p = *argv.add(k);
        if p.is_null() {
            set_error(format!("argv[{k}] is null"));
            return 2;
        }
        args.push(CStr::from_ptr(p).to_string_lossy().into_owned());
    }
    catch_unwind(|| cuspwave::cli::run(args)).unwrap_or(2)
}
