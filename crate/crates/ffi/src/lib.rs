//! C interface to `fracperim`.
//!
//! Profiles and quadrature settings live behind opaque handles created and
//! freed by this library. Every function returns an [`FpStatus`]; on failure
//! the message of the last error on the calling thread is available from
//! [`fp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fracperim::energy::{energy_profile, frac_perimeter, pi_term, QuadConfig};
use fracperim::kernel::{periodic_kernel, KernelParams};
use fracperim::minimize::{minimize, project_monotone, MinimizeConfig};
use fracperim::shapes::{volume, Profile};
use fracperim::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    NonConvergence = 3,
    Singular = 4,
    Parse = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque monotone profile.
pub struct FpProfile(Profile);

/// Opaque quadrature settings.
pub struct FpQuad(QuadConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FpStatus {
    match e {
        Error::NonConvergence(_) | Error::CapBiasDominant { .. } => FpStatus::NonConvergence,
        Error::SingularPoint | Error::SingularConfiguration(_) => FpStatus::Singular,
        Error::Parse(_) => FpStatus::Parse,
        Error::Io(_) => FpStatus::Io,
        _ => FpStatus::InvalidArgument,
    }
}

struct Failure(FpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FpStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FpStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, empty after a success. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates quadrature settings for dimension `n`, order `s` and relative
/// tolerance `rel_tol`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_quad_new(n: usize, s: f64, rel_tol: f64, out: *mut *mut FpQuad) -> FpStatus {
    guard(|| {
        let q = QuadConfig::new(KernelParams::new(n, s)?).with_rel_tol(rel_tol);
        q.validate()?;
        write(out, Box::into_raw(Box::new(FpQuad(q))), "out")
    })
}

/// # Safety
/// `q` must come from [`fp_quad_new`] and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fp_quad_free(q: *mut FpQuad) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Creates a profile from `m` nonincreasing nonnegative cell values.
///
/// # Safety
/// `values` must point to `m` doubles and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_profile_new(n: usize, values: *const f64, m: usize, out: *mut *mut FpProfile) -> FpStatus {
    guard(|| {
        let v = slice(values, m, "values")?.to_vec();
        let p = Profile::new(n, v)?;
        write(out, Box::into_raw(Box::new(FpProfile(p))), "out")
    })
}

/// Creates a profile from a literal `cyl:R`, `ball:R`, `file:PATH` or
/// `rand:SEED:M`; `cyl` and `ball` use `m` cells.
///
/// # Safety
/// `literal` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_profile_parse(
    literal: *const c_char,
    n: usize,
    m: usize,
    out: *mut *mut FpProfile,
) -> FpStatus {
    guard(|| {
        if literal.is_null() {
            return Err(null("literal"));
        }
        let text = CStr::from_ptr(literal)
            .to_str()
            .map_err(|_| Failure(FpStatus::Parse, "literal is not UTF-8".into()))?;
        let p = fracperim::io::parse_profile(text, n, m)?;
        write(out, Box::into_raw(Box::new(FpProfile(p))), "out")
    })
}

/// # Safety
/// `p` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fp_profile_free(p: *mut FpProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of cells of the profile.
///
/// # Safety
/// `p` must be a live profile handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_profile_cells(p: *const FpProfile, out: *mut usize) -> FpStatus {
    guard(|| write(out, handle(p, "profile")?.0.m(), "out"))
}

/// Copies the cell values into `buf`, which holds `len` doubles.
///
/// # Safety
/// `p` must be a live profile handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fp_profile_values(p: *const FpProfile, buf: *mut f64, len: usize) -> FpStatus {
    guard(|| {
        let v = handle(p, "profile")?.0.values();
        if len < v.len() {
            return Err(Failure(
                FpStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", v.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// Volume of the profile set in one period.
///
/// # Safety
/// `p` must be a live profile handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_profile_volume(p: *const FpProfile, out: *mut f64) -> FpStatus {
    guard(|| write(out, volume(&handle(p, "profile")?.0), "out"))
}

type EnergyFn = fn(&Profile, &QuadConfig) -> fracperim::Result<fracperim::energy::EnergyValue>;

unsafe fn energy_call(
    f: EnergyFn,
    p: *const FpProfile,
    q: *const FpQuad,
    value: *mut f64,
    error: *mut f64,
) -> FpStatus {
    guard(|| {
        let e = f(&handle(p, "profile")?.0, &handle(q, "quad")?.0)?;
        write(value, e.value, "value")?;
        if !error.is_null() {
            error.write(e.error);
        }
        Ok(())
    })
}

/// Periodic perimeter of the profile set; `error` may be null.
///
/// # Safety
/// Handles must be live; `value` valid for writes, `error` null or valid.
#[no_mangle]
pub unsafe extern "C" fn fp_energy(p: *const FpProfile, q: *const FpQuad, value: *mut f64, error: *mut f64) -> FpStatus {
    energy_call(energy_profile, p, q, value, error)
}

/// Free fractional perimeter of the profile set in one period.
///
/// # Safety
/// As for [`fp_energy`].
#[no_mangle]
pub unsafe extern "C" fn fp_perimeter(
    p: *const FpProfile,
    q: *const FpQuad,
    value: *mut f64,
    error: *mut f64,
) -> FpStatus {
    energy_call(frac_perimeter, p, q, value, error)
}

/// Interaction across the period boundary.
///
/// # Safety
/// As for [`fp_energy`].
#[no_mangle]
pub unsafe extern "C" fn fp_pi_term(p: *const FpProfile, q: *const FpQuad, value: *mut f64, error: *mut f64) -> FpStatus {
    energy_call(pi_term, p, q, value, error)
}

/// Periodic kernel at the point `x` of `len` coordinates, with `len` the
/// dimension.
///
/// # Safety
/// `x` must point to `len` doubles and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_kernel(s: f64, x: *const f64, len: usize, out: *mut f64) -> FpStatus {
    guard(|| {
        let x = slice(x, len, "x")?;
        let k = KernelParams::new(len, s)?;
        write(out, periodic_kernel(x, &k)?, "out")
    })
}

/// Euclidean projection of `len` values onto nonincreasing nonnegative
/// vectors; `out` may alias `values`.
///
/// # Safety
/// Both pointers must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fp_project_monotone(values: *const f64, len: usize, out: *mut f64) -> FpStatus {
    guard(|| {
        let v = project_monotone(slice(values, len, "values")?);
        if len > 0 && out.is_null() {
            return Err(null("out"));
        }
        ptr::copy(v.as_ptr(), out, len);
        Ok(())
    })
}

/// Minimizes the periodic perimeter at volume `mu` on `m` cells. The
/// minimizer is returned as a new profile; `energy` may be null.
///
/// # Safety
/// `q` must be live, `out` valid for writes, `energy` null or valid.
#[no_mangle]
pub unsafe extern "C" fn fp_minimize(
    q: *const FpQuad,
    mu: f64,
    m: usize,
    seed: u64,
    out: *mut *mut FpProfile,
    energy: *mut f64,
) -> FpStatus {
    guard(|| {
        let mut cfg = MinimizeConfig::new(mu, handle(q, "quad")?.0);
        cfg.m = m;
        cfg.seed = seed;
        let res = minimize(&cfg)?;
        if !energy.is_null() {
            energy.write(res.energy.value);
        }
        write(out, Box::into_raw(Box::new(FpProfile(res.profile))), "out")
    })
}
