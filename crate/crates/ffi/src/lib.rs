//! C interface to `ppt-core`.
//!
//! States are opaque handles released with [`ppt_state_free`]. Every call
//! returns a [`PptStatus`]; on failure [`ppt_last_error`] describes what
//! went wrong on the calling thread. Strings handed out by the library are
//! released with [`ppt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ppt_core::hilbert::StateFile;
use ppt_core::search::{search, RankTarget, SearchConfig};
use ppt_core::separability::{classify_state, ClassifyConfig};
use ppt_core::{BipartiteDims, Error};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotPpt = 3,
    NotFound = 4,
    Io = 5,
    Internal = 6,
}

/// Opaque PPT state.
pub struct PptStateHandle {
    inner: ppt_core::PptState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: PptStatus, msg: impl Into<String>) -> PptStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> PptStatus {
    let status = match e {
        Error::NotPpt { .. } => PptStatus::NotPpt,
        Error::Io(_) => PptStatus::Io,
        _ => PptStatus::InvalidInput,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> PptStatus) -> PptStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PptStatus::Internal, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, PptStatus> {
    if s.is_null() {
        return Err(fail(PptStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(PptStatus::InvalidInput, "string is not UTF-8"))
}

unsafe fn write_string(s: String, out: *mut *mut c_char) -> PptStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            PptStatus::Ok
        }
        Err(_) => fail(PptStatus::Internal, "string contains NUL"),
    }
}

unsafe fn give_state(st: ppt_core::PptState, out: *mut *mut PptStateHandle) -> PptStatus {
    *out = Box::into_raw(Box::new(PptStateHandle { inner: st }));
    PptStatus::Ok
}

/// Message for the last failed call on this thread; empty after success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ppt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses and certifies a state from the JSON state format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppt_state_from_json(
    json: *const c_char,
    out: *mut *mut PptStateHandle,
) -> PptStatus {
    guard(|| {
        if out.is_null() {
            return fail(PptStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let file: StateFile = match serde_json::from_str(text) {
            Ok(f) => f,
            Err(e) => return fail(PptStatus::InvalidInput, e.to_string()),
        };
        match file.to_state() {
            Ok(st) => give_state(st, out),
            Err(e) => from_error(e),
        }
    })
}

/// Loads and certifies a state file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppt_state_load(
    path: *const c_char,
    out: *mut *mut PptStateHandle,
) -> PptStatus {
    guard(|| {
        if out.is_null() {
            return fail(PptStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let path = match read_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match StateFile::load(path).and_then(|f| f.to_state()) {
            Ok(st) => give_state(st, out),
            Err(e) => from_error(e),
        }
    })
}

/// Rank search for an `n_a × n_b` state with ranks `(m, n)`. Returns
/// `NotFound` and leaves `*out` null when no restart reaches the target.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppt_search(
    n_a: usize,
    n_b: usize,
    m: usize,
    n: usize,
    seed: u64,
    restarts: usize,
    out: *mut *mut PptStateHandle,
) -> PptStatus {
    guard(|| {
        if out.is_null() {
            return fail(PptStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let dims = match BipartiteDims::new(n_a, n_b) {
            Ok(d) => d,
            Err(e) => return from_error(e),
        };
        let target = match RankTarget::new(dims, m, n) {
            Ok(t) => t,
            Err(e) => return from_error(e),
        };
        if restarts == 0 {
            return fail(PptStatus::InvalidInput, "restarts must be positive");
        }
        let cfg = SearchConfig {
            seed,
            restarts,
            ..SearchConfig::default()
        };
        let res = search(dims, target, &cfg);
        match res.state {
            Some(st) if st.ranks == (m, n) => give_state(st, out),
            _ => fail(
                PptStatus::NotFound,
                format!("no state with ranks ({m},{n}) after {restarts} restarts"),
            ),
        }
    })
}

/// Local dimensions of the state.
///
/// # Safety
/// `state` must be a live handle; `n_a` and `n_b` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ppt_state_dims(
    state: *const PptStateHandle,
    n_a: *mut usize,
    n_b: *mut usize,
) -> PptStatus {
    guard(|| {
        if state.is_null() || n_a.is_null() || n_b.is_null() {
            return fail(PptStatus::NullPointer, "null pointer");
        }
        let d = (*state).inner.dims();
        *n_a = d.n_a();
        *n_b = d.n_b();
        PptStatus::Ok
    })
}

/// Ranks of `ρ` and `ρ^P`.
///
/// # Safety
/// `state` must be a live handle; `m` and `n` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ppt_state_ranks(
    state: *const PptStateHandle,
    m: *mut usize,
    n: *mut usize,
) -> PptStatus {
    guard(|| {
        if state.is_null() || m.is_null() || n.is_null() {
            return fail(PptStatus::NullPointer, "null pointer");
        }
        let r = (*state).inner.ranks;
        *m = r.0;
        *n = r.1;
        PptStatus::Ok
    })
}

/// Copies the density matrix row-major as interleaved `(re, im)` pairs.
/// `len` is the capacity of `buf` in doubles and must be at least `2N²`.
///
/// # Safety
/// `state` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ppt_state_matrix(
    state: *const PptStateHandle,
    buf: *mut f64,
    len: usize,
) -> PptStatus {
    guard(|| {
        if state.is_null() || buf.is_null() {
            return fail(PptStatus::NullPointer, "null pointer");
        }
        let m = (*state).inner.rho.as_matrix();
        let n = m.nrows();
        if len < 2 * n * n {
            return fail(
                PptStatus::InvalidInput,
                format!("buffer holds {len} doubles, need {}", 2 * n * n),
            );
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                out[2 * (i * n + j)] = z.re;
                out[2 * (i * n + j) + 1] = z.im;
            }
        }
        PptStatus::Ok
    })
}

/// Face dimension of the state in the PPT cone.
///
/// # Safety
/// `state` must be a live handle and `dim_f` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppt_face_dimension(
    state: *const PptStateHandle,
    dim_f: *mut usize,
) -> PptStatus {
    guard(|| {
        if state.is_null() || dim_f.is_null() {
            return fail(PptStatus::NullPointer, "null pointer");
        }
        match ppt_core::face::analyze(&(*state).inner) {
            Ok(r) => {
                *dim_f = r.dim_f;
                PptStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Serializes the state in the JSON state format.
///
/// # Safety
/// `state` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppt_state_to_json(
    state: *const PptStateHandle,
    out: *mut *mut c_char,
) -> PptStatus {
    guard(|| {
        if state.is_null() || out.is_null() {
            return fail(PptStatus::NullPointer, "null pointer");
        }
        *out = ptr::null_mut();
        match serde_json::to_string(&(*state).inner.to_file()) {
            Ok(s) => write_string(s, out),
            Err(e) => fail(PptStatus::Internal, e.to_string()),
        }
    })
}

/// Full classification as a JSON object.
///
/// # Safety
/// `state` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppt_classify(
    state: *const PptStateHandle,
    seed: u64,
    out: *mut *mut c_char,
) -> PptStatus {
    guard(|| {
        if state.is_null() || out.is_null() {
            return fail(PptStatus::NullPointer, "null pointer");
        }
        *out = ptr::null_mut();
        let cfg = ClassifyConfig {
            seed,
            ..ClassifyConfig::default()
        };
        match classify_state(&(*state).inner, &cfg) {
            Ok(c) => match serde_json::to_string(&c) {
                Ok(s) => write_string(s, out),
                Err(e) => fail(PptStatus::Internal, e.to_string()),
            },
            Err(e) => from_error(e),
        }
    })
}

/// Releases a state handle. Null is ignored.
///
/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ppt_state_free(state: *mut PptStateHandle) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ppt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
