use std::ffi::{CStr, CString};
use std::ptr;

use depevap_ffi::*;

fn params(size: usize, p: f64, boundary: u32, colored: bool) -> DepevapParams {
    DepevapParams {
        size,
        p,
        boundary,
        colored,
        seed: 7,
    }
}

fn last_error() -> Option<String> {
    let ptr = depevap_last_error_message();
    if ptr.is_null() {
        None
    } else {
        Some(unsafe { CStr::from_ptr(ptr) }.to_string_lossy().into_owned())
    }
}

#[test]
fn build_len_entropy_and_free() {
    let p = params(3, 0.5, DEPEVAP_BOUNDARY_REFLECTING, true);
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { depevap_state_build(&p, &mut state) }, DepevapStatus::Ok);
    assert!(!state.is_null());
    assert!(last_error().is_none());

    let mut len = 0usize;
    assert_eq!(unsafe { depevap_state_len(state, &mut len) }, DepevapStatus::Ok);
    assert!(len > 1);

    let (mut total, mut uncolored) = (f64::NAN, f64::NAN);
    assert_eq!(
        unsafe { depevap_state_midcut_entropy(state, &mut total, &mut uncolored) },
        DepevapStatus::Ok
    );
    assert!(total > 0.0 && uncolored > 0.0 && total >= uncolored - 1e-12);

    let mut self_fidelity = 0.0;
    assert_eq!(
        unsafe { depevap_state_fidelity(state, state, &mut self_fidelity) },
        DepevapStatus::Ok
    );
    assert!((self_fidelity - 1.0).abs() < 1e-12);

    unsafe { depevap_state_free(state) };
    unsafe { depevap_state_free(ptr::null_mut()) };
}

#[test]
fn generated_state_matches_exact_state() {
    let p = params(3, 0.3, DEPEVAP_BOUNDARY_REFLECTING, true);
    let (mut exact, mut generated) = (ptr::null_mut(), ptr::null_mut());
    let mut success = 0.0;
    assert_eq!(unsafe { depevap_state_build(&p, &mut exact) }, DepevapStatus::Ok);
    assert_eq!(
        unsafe { depevap_state_generate(&p, false, &mut generated, &mut success) },
        DepevapStatus::Ok
    );

    let mut expected = 0.0;
    assert_eq!(
        unsafe { depevap_success_probability(&p, &mut expected) },
        DepevapStatus::Ok
    );
    assert!((success - expected).abs() < 1e-12, "{success} vs {expected}");

    let mut f = 0.0;
    assert_eq!(
        unsafe { depevap_state_fidelity(exact, generated, &mut f) },
        DepevapStatus::Ok
    );
    assert!((f - 1.0).abs() < 1e-10, "fidelity {f}");
    unsafe {
        depevap_state_free(exact);
        depevap_state_free(generated);
    }
}

#[test]
fn hamiltonian_residual_is_zero_in_absorbing_mode() {
    let p = params(3, 0.8, DEPEVAP_BOUNDARY_ABSORBING, true);
    let mut worst = f64::NAN;
    assert_eq!(
        unsafe { depevap_hamiltonian_max_residual(&p, &mut worst) },
        DepevapStatus::Ok
    );
    assert!(worst < 1e-10, "{worst}");

    let reflecting = params(3, 0.8, DEPEVAP_BOUNDARY_REFLECTING, true);
    assert_eq!(
        unsafe { depevap_hamiltonian_max_residual(&reflecting, &mut worst) },
        DepevapStatus::Unsupported
    );
    assert!(last_error().unwrap().contains("unsupported"));
}

#[test]
fn errors_map_to_status_codes() {
    let mut state = ptr::null_mut();
    let even = params(4, 0.5, DEPEVAP_BOUNDARY_REFLECTING, true);
    assert_eq!(
        unsafe { depevap_state_build(&even, &mut state) },
        DepevapStatus::InvalidArgument
    );
    assert!(state.is_null());
    assert!(last_error().unwrap().contains("odd"));

    let bad_mode = params(3, 0.5, 9, true);
    assert_eq!(
        unsafe { depevap_state_build(&bad_mode, &mut state) },
        DepevapStatus::InvalidArgument
    );

    assert_eq!(
        unsafe { depevap_state_build(ptr::null(), &mut state) },
        DepevapStatus::NullPointer
    );
    let ok = params(3, 0.5, DEPEVAP_BOUNDARY_REFLECTING, true);
    assert_eq!(
        unsafe { depevap_state_build(&ok, ptr::null_mut()) },
        DepevapStatus::NullPointer
    );
    assert_eq!(
        unsafe { depevap_state_len(ptr::null(), ptr::null_mut()) },
        DepevapStatus::NullPointer
    );
    assert!(last_error().unwrap().contains("null pointer"));
}

#[test]
fn roughness_of_known_profile() {
    let heights = [0, 1, 0, 1, 0];
    let mut w = f64::NAN;
    assert_eq!(
        unsafe { depevap_roughness(heights.as_ptr(), heights.len(), &mut w) },
        DepevapStatus::Ok
    );
    // boundary sites excluded: interior 1, 0, 1 has mean 2/3 and variance 2/9
    assert!((w - (2.0_f64 / 9.0).sqrt()).abs() < 1e-12, "{w}");

    let broken = [0, 3, 0];
    assert_eq!(
        unsafe { depevap_roughness(broken.as_ptr(), broken.len(), &mut w) },
        DepevapStatus::InvalidArgument
    );
}

#[test]
fn write_creates_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.bin");
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let p = params(3, 0.5, DEPEVAP_BOUNDARY_REFLECTING, false);
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { depevap_state_build(&p, &mut state) }, DepevapStatus::Ok);
    assert_eq!(
        unsafe { depevap_state_write(state, c_path.as_ptr()) },
        DepevapStatus::Ok
    );
    assert!(std::fs::metadata(&path).unwrap().len() > 0);
    unsafe { depevap_state_free(state) };
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(depevap_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
