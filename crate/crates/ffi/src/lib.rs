//! C ABI over the `ncvn` library.
//!
//! Polynomials and matrix tuples cross the boundary as opaque handles that
//! the caller releases with the matching `_free` function. Every fallible
//! call returns an [`NcvnStatus`]; on failure a message describing the last
//! error on the calling thread is available from [`ncvn_last_error`].
//! Strings returned by the library are released with [`ncvn_string_free`].
//!
//! Matrices are passed as separate real and imaginary arrays in row-major
//! order; a tuple of `m` matrices of size `k` uses `m * k * k` entries, one
//! matrix after another.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ncvn::matclasses::{ConstraintClass, MatrixTuple};
use ncvn::ncpoly::{self, NCPolynomial};
use ncvn::optimize::{self, MaximizeOptions};
use ncvn::{linops, Error};
use num_complex::Complex64;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcvnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Arity = 4,
    InvalidArgument = 5,
    Infeasible = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque polynomial handle.
pub struct NcvnPoly(NCPolynomial);

/// Opaque matrix-tuple handle.
pub struct NcvnTuple(MatrixTuple);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> NcvnStatus {
    match e {
        Error::Syntax { .. } | Error::EmptyInput => NcvnStatus::Parse,
        Error::LetterOutOfRange { .. } | Error::ArityMismatch { .. } => NcvnStatus::Arity,
        Error::DimensionMismatch(_) | Error::InvalidArgument(_) | Error::InvalidClass(_) => NcvnStatus::InvalidArgument,
        Error::Precondition(_) | Error::Infeasible(_) => NcvnStatus::Infeasible,
        Error::Numerical(_) | Error::BudgetExceeded(_) => NcvnStatus::Numerical,
        Error::Io(_) | Error::Serde(_) => NcvnStatus::Io,
    }
}

struct Failure(NcvnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Run `f`, converting errors and panics into a status and a stored message.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> NcvnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NcvnStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NcvnStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(NcvnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(NcvnStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

unsafe fn read_matrices(arity: usize, dim: usize, re: *const f64, im: *const f64) -> Result<Vec<ncvn::linalg::CMat>, Failure> {
    if re.is_null() || im.is_null() {
        return Err(null("matrix data"));
    }
    if arity == 0 || dim == 0 {
        return Err(Failure(NcvnStatus::InvalidArgument, "arity and dim must be positive".into()));
    }
    let n = arity
        .checked_mul(dim)
        .and_then(|x| x.checked_mul(dim))
        .ok_or_else(|| Failure(NcvnStatus::InvalidArgument, "size overflow".into()))?;
    let re = std::slice::from_raw_parts(re, n);
    let im = std::slice::from_raw_parts(im, n);
    Ok((0..arity)
        .map(|i| {
            ncvn::linalg::CMat::from_fn(dim, dim, |r, c| {
                let at = i * dim * dim + r * dim + c;
                Complex64::new(re[at], im[at])
            })
        })
        .collect())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ncvn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ncvn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ncvn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse `text` as a polynomial in `arity` letters.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncvn_poly_parse(text: *const c_char, arity: usize, out: *mut *mut NcvnPoly) -> NcvnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(text, "text")?;
        let p = ncpoly::parse(text, arity)?;
        *out = Box::into_raw(Box::new(NcvnPoly(p)));
        Ok(())
    })
}

/// The family member `q_n = Σ_{j≤n} x*^j x^j + 1 − x x*`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncvn_poly_qn(n: usize, out: *mut *mut NcvnPoly) -> NcvnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(NcvnPoly(ncpoly::qn_family(n)?)));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ncvn_poly_free(p: *mut NcvnPoly) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Degree of `p`, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncvn_poly_degree(p: *const NcvnPoly) -> usize {
    p.as_ref().map_or(0, |p| p.0.degree())
}

/// Number of letters of `p`, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncvn_poly_arity(p: *const NcvnPoly) -> usize {
    p.as_ref().map_or(0, |p| p.0.arity())
}

/// Canonical text of `p`; free with `ncvn_string_free`. Null on a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncvn_poly_to_string(p: *const NcvnPoly) -> *mut c_char {
    p.as_ref().map_or(ptr::null_mut(), |p| to_c_string(p.0.to_string()))
}

/// Build a tuple of `arity` square matrices of size `dim`.
///
/// # Safety
/// `re` and `im` must each point to `arity * dim * dim` doubles; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncvn_tuple_new(
    arity: usize,
    dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut NcvnTuple,
) -> NcvnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = MatrixTuple::new(read_matrices(arity, dim, re, im)?)?;
        *out = Box::into_raw(Box::new(NcvnTuple(t)));
        Ok(())
    })
}

/// Parse a tuple from its JSON form `{"m", "k", "re", "im"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncvn_tuple_from_json(json: *const c_char, out: *mut *mut NcvnTuple) -> NcvnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = MatrixTuple::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(NcvnTuple(t)));
        Ok(())
    })
}

/// JSON form of `t`; free with `ncvn_string_free`. Null on a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncvn_tuple_to_json(t: *const NcvnTuple) -> *mut c_char {
    t.as_ref()
        .and_then(|t| t.0.to_json().ok())
        .map_or(ptr::null_mut(), to_c_string)
}

/// Matrix size of `t`, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncvn_tuple_dim(t: *const NcvnTuple) -> usize {
    t.as_ref().map_or(0, |t| t.0.dim())
}

/// Number of matrices in `t`, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncvn_tuple_arity(t: *const NcvnTuple) -> usize {
    t.as_ref().map_or(0, |t| t.0.arity())
}

/// # Safety
/// `t` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ncvn_tuple_free(t: *mut NcvnTuple) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// `‖p(t)‖` in the operator norm.
///
/// # Safety
/// `p` and `t` must be live handles; `out_norm` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncvn_evaluate_norm(p: *const NcvnPoly, t: *const NcvnTuple, out_norm: *mut f64) -> NcvnStatus {
    guard(|| {
        let out = out_arg(out_norm, "out_norm")?;
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let t = t.as_ref().ok_or_else(|| null("t"))?;
        *out = linops::evaluate_norm(&p.0, &t.0)?;
        Ok(())
    })
}

/// Multi-start maximization of `‖p(t)‖` over dimension-`dim` members of the
/// class described by `class_spec` (`contraction`, `nilpotent:n`,
/// `shifted:RE,IM,n`, `row:m`, `column-isometry:m`). `out_argmax` may be
/// null; otherwise it receives a new tuple handle.
///
/// # Safety
/// `p` must be a live handle, `class_spec` a NUL-terminated string and
/// `out_value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncvn_maximize(
    p: *const NcvnPoly,
    class_spec: *const c_char,
    dim: usize,
    restarts: usize,
    seed: u64,
    out_value: *mut f64,
    out_argmax: *mut *mut NcvnTuple,
) -> NcvnStatus {
    guard(|| {
        let value = out_arg(out_value, "out_value")?;
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let class = ConstraintClass::parse_spec(str_arg(class_spec, "class_spec")?, p.0.arity())?;
        let rec = optimize::maximize(&p.0, &class, dim, &MaximizeOptions::new(restarts, seed))?;
        *value = rec.best_value;
        if let Some(slot) = out_argmax.as_mut() {
            *slot = Box::into_raw(Box::new(NcvnTuple(rec.argmax)));
        }
        Ok(())
    })
}

/// Numerical radius `max |⟨Av, v⟩|` of a `dim × dim` matrix.
///
/// # Safety
/// `re` and `im` must each point to `dim * dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ncvn_numerical_radius(dim: usize, re: *const f64, im: *const f64, out: *mut f64) -> NcvnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let a = read_matrices(1, dim, re, im)?.remove(0);
        *out = linops::numerical_radius(&a)?.value;
        Ok(())
    })
}
