//! C ABI over the `depevap` library.
//!
//! Every entry point returns a [`DepevapStatus`]. Results are written through out-pointers,
//! and a human-readable message for the most recent failure on the calling thread is
//! available from [`depevap_last_error_message`]. States are opaque handles created by
//! [`depevap_state_build`] or [`depevap_state_generate`] and released with
//! [`depevap_state_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use depevap::entanglement::{entropy_exact, Bipartition};
use depevap::exact::{build_state, success_probability, SparseState};
use depevap::hamiltonian::{assemble_hamiltonian, term_residuals};
use depevap::model::{BoundaryMode, HeightProfile, ModelParams};
use depevap::scaling::roughness;
use depevap::seqgen::{fidelity, run_generation};
use depevap::Error;

/// Reflecting boundary: heights never drop below the horizon.
pub const DEPEVAP_BOUNDARY_REFLECTING: u32 = 0;
/// Absorbing boundary: post-selection onto trajectories that stay at or above zero.
pub const DEPEVAP_BOUNDARY_ABSORBING: u32 = 1;

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepevapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Capacity = 3,
    Unsupported = 4,
    Decode = 5,
    Io = 6,
    Numeric = 7,
    Panic = 8,
}

/// Model parameters. `boundary` is one of the `DEPEVAP_BOUNDARY_*` constants.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DepevapParams {
    pub size: usize,
    pub p: f64,
    pub boundary: u32,
    pub colored: bool,
    pub seed: u64,
}

/// Opaque handle to a normalized sparse state.
pub struct DepevapState {
    inner: SparseState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(error: &Error) -> DepevapStatus {
    match error {
        Error::InvalidParameter(_) | Error::InvalidProfile(_) | Error::Manifest(_) => DepevapStatus::InvalidArgument,
        Error::Capacity { .. } => DepevapStatus::Capacity,
        Error::Unsupported(_) => DepevapStatus::Unsupported,
        Error::Decode(_) | Error::MalformedKey(_) | Error::Encode(_) => DepevapStatus::Decode,
        Error::Io(_) => DepevapStatus::Io,
        Error::NotNormalized(_)
        | Error::DimensionMismatch(_)
        | Error::NoDeformation(_)
        | Error::Emitter(_)
        | Error::Fit(_) => DepevapStatus::Numeric,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, translating library errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DepevapStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_last_error();
            DepevapStatus::Ok
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer passed as {name}"));
            DepevapStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            DepevapStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, name: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees that a non-null pointer is valid for reads.
    unsafe { ptr.as_ref() }.ok_or(Failure::Null(name))
}

unsafe fn write_out<T>(ptr: *mut T, value: T, name: &'static str) -> Result<(), Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: non-null and, per the caller's contract, valid for writes.
    unsafe { ptr.write(value) };
    Ok(())
}

fn model_params(raw: &DepevapParams) -> Result<ModelParams, Failure> {
    let boundary = match raw.boundary {
        DEPEVAP_BOUNDARY_REFLECTING => BoundaryMode::Reflecting,
        DEPEVAP_BOUNDARY_ABSORBING => BoundaryMode::Absorbing,
        other => return Err(Error::InvalidParameter(format!("unknown boundary code {other}")).into()),
    };
    Ok(ModelParams::new(raw.size, raw.p, boundary, raw.colored, raw.seed)?)
}

fn into_handle(state: SparseState) -> *mut DepevapState {
    Box::into_raw(Box::new(DepevapState { inner: state }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn depevap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failure on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn depevap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Builds the exact state by enumerating trajectories.
///
/// # Safety
/// `params` must point to a valid `DepevapParams` and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn depevap_state_build(
    params: *const DepevapParams,
    out: *mut *mut DepevapState,
) -> DepevapStatus {
    guard(|| {
        let params = model_params(unsafe { deref(params, "params") }?)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let state = build_state(&params)?;
        unsafe { write_out(out, into_handle(state), "out") }
    })
}

/// Generates the state sequentially and post-selects the emitter. `success` receives the
/// post-selection probability and may be NULL.
///
/// # Safety
/// `params` must point to a valid `DepevapParams`, `out` must be valid for writes and
/// `success` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn depevap_state_generate(
    params: *const DepevapParams,
    cooling: bool,
    out: *mut *mut DepevapState,
    success: *mut f64,
) -> DepevapStatus {
    guard(|| {
        let params = model_params(unsafe { deref(params, "params") }?)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let generation = run_generation(&params, cooling)?;
        if !success.is_null() {
            unsafe { success.write(generation.success_probability) };
        }
        unsafe { write_out(out, into_handle(generation.state), "out") }
    })
}

/// Number of basis configurations with nonzero amplitude.
///
/// # Safety
/// `state` must be a live handle and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn depevap_state_len(state: *const DepevapState, out: *mut usize) -> DepevapStatus {
    guard(|| {
        let state = unsafe { deref(state, "state") }?;
        unsafe { write_out(out, state.inner.len(), "out") }
    })
}

/// Squared overlap of two states with identical parameters.
///
/// # Safety
/// `a` and `b` must be live handles and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn depevap_state_fidelity(
    a: *const DepevapState,
    b: *const DepevapState,
    out: *mut f64,
) -> DepevapStatus {
    guard(|| {
        let a = unsafe { deref(a, "a") }?;
        let b = unsafe { deref(b, "b") }?;
        let f = fidelity(&a.inner, &b.inner)?;
        unsafe { write_out(out, f, "out") }
    })
}

/// Entanglement entropy in bits across the horizontal mid cut, from the Schmidt spectrum.
/// `uncolored` receives the surface part and may be NULL.
///
/// # Safety
/// `state` must be a live handle, `total` must be valid for writes and `uncolored` must be
/// NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn depevap_state_midcut_entropy(
    state: *const DepevapState,
    total: *mut f64,
    uncolored: *mut f64,
) -> DepevapStatus {
    guard(|| {
        let state = unsafe { deref(state, "state") }?;
        if total.is_null() {
            return Err(Failure::Null("total"));
        }
        let cut_row = state.inner.params.mid_cut();
        let report = entropy_exact(&state.inner, Bipartition::SpaceLike { cut_row })?;
        if !uncolored.is_null() {
            unsafe { uncolored.write(report.s_uncolored) };
        }
        unsafe { write_out(total, report.s_total, "total") }
    })
}

/// Writes the state in the library's binary format.
///
/// # Safety
/// `state` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn depevap_state_write(state: *const DepevapState, path: *const c_char) -> DepevapStatus {
    guard(|| {
        let state = unsafe { deref(state, "state") }?;
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        // SAFETY: non-null and NUL-terminated per the caller's contract.
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|e| Error::InvalidParameter(format!("path is not UTF-8: {e}")))?;
        state.inner.write_binary(Path::new(path))?;
        Ok(())
    })
}

/// Releases a state handle. NULL is ignored.
///
/// # Safety
/// `state` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn depevap_state_free(state: *mut DepevapState) {
    if !state.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Probability that the free process returns to the horizon and stays admissible.
///
/// # Safety
/// `params` must point to a valid `DepevapParams` and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn depevap_success_probability(params: *const DepevapParams, out: *mut f64) -> DepevapStatus {
    guard(|| {
        let params = model_params(unsafe { deref(params, "params") }?)?;
        let value = success_probability(&params)?;
        unsafe { write_out(out, value, "out") }
    })
}

/// Largest `|<psi|h_j|psi>|` over the local terms of the parent Hamiltonian.
/// Requires the absorbing boundary.
///
/// # Safety
/// `params` must point to a valid `DepevapParams` and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn depevap_hamiltonian_max_residual(
    params: *const DepevapParams,
    out: *mut f64,
) -> DepevapStatus {
    guard(|| {
        let params = model_params(unsafe { deref(params, "params") }?)?;
        let h = assemble_hamiltonian(&params)?;
        let state = build_state(&params)?;
        let worst = term_residuals(&h, &state)?
            .into_iter()
            .fold(0.0_f64, |m, r| m.max(r.abs()));
        unsafe { write_out(out, worst, "out") }
    })
}

/// Roughness of a height profile given as `len = L + 2` consecutive heights, boundary
/// sites `0` and `L + 1` included. Only the `L` interior sites enter the average.
///
/// # Safety
/// `heights` must be valid for `len` reads and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn depevap_roughness(heights: *const i32, len: usize, out: *mut f64) -> DepevapStatus {
    guard(|| {
        if heights.is_null() {
            return Err(Failure::Null("heights"));
        }
        // SAFETY: non-null and valid for `len` reads per the caller's contract.
        let slice = unsafe { std::slice::from_raw_parts(heights, len) };
        let profile = HeightProfile::from_heights(slice.to_vec())?;
        unsafe { write_out(out, roughness(&profile), "out") }
    })
}
