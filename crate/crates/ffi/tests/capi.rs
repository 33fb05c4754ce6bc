//! Exercises the C ABI the way a foreign caller would: raw buffers, opaque
//! handles, status codes, and the last-error channel.

use std::ffi::{CStr, CString};

use consens_ffi::*;

fn last_error() -> String {
    let ptr = consens_last_error_message();
    assert!(!ptr.is_null());
    let text = unsafe { CStr::from_ptr(ptr) }.to_string_lossy().into_owned();
    unsafe { consens_string_free(ptr) };
    text
}

#[test]
fn distances_through_the_abi() {
    let a = [1.0, 0.0];
    let b = [0.0, 1.0];
    let mut out = 0.0;
    let status = unsafe { consens_euclidean_distance(a.as_ptr(), b.as_ptr(), 2, &mut out) };
    assert_eq!(status, ConsensStatus::Ok);
    assert!((out - 2.0_f64.sqrt()).abs() < 1e-12);

    let status = unsafe { consens_minkowski_distance(a.as_ptr(), b.as_ptr(), 2, 1.0, &mut out) };
    assert_eq!(status, ConsensStatus::Ok);
    assert!((out - 2.0).abs() < 1e-12);

    let truth = [1.0, 0.0];
    let status =
        unsafe { consens_triple_distance(a.as_ptr(), b.as_ptr(), truth.as_ptr(), 2, &mut out) };
    assert_eq!(status, ConsensStatus::Ok);
    assert!((out - 2.0 * 2.0_f64.sqrt()).abs() < 1e-12);
}

#[test]
fn invalid_inputs_set_the_error_message() {
    let not_simplex = [0.9, 0.9];
    let b = [0.5, 0.5];
    let mut out = 0.0;
    let status =
        unsafe { consens_euclidean_distance(not_simplex.as_ptr(), b.as_ptr(), 2, &mut out) };
    assert_eq!(status, ConsensStatus::InvalidArgument);
    assert!(last_error().contains("sum"));

    let status =
        unsafe { consens_euclidean_distance(std::ptr::null(), b.as_ptr(), 2, &mut out) };
    assert_eq!(status, ConsensStatus::NullPointer);

    let status = unsafe { consens_minkowski_distance(b.as_ptr(), b.as_ptr(), 2, 0.5, &mut out) };
    assert_eq!(status, ConsensStatus::InvalidArgument);
}

#[test]
fn pruning_helpers() {
    let weights = [0.9, 0.8, 0.7];
    let mut tau = 0.0;
    let status = unsafe { consens_prune_threshold(weights.as_ptr(), 3, 0.5, &mut tau) };
    assert_eq!(status, ConsensStatus::Ok);
    assert_eq!(tau, 0.8);

    let mut beta = 0.0;
    let status = unsafe { consens_ideal_beta(weights.as_ptr(), 3, &mut beta) };
    assert_eq!(status, ConsensStatus::Ok);
    assert!((beta - 0.5).abs() < 1e-12);

    let status = unsafe { consens_prune_threshold(weights.as_ptr(), 3, 1.5, &mut tau) };
    assert_eq!(status, ConsensStatus::InvalidArgument);
}

#[test]
fn matrix_handles_and_metrics() {
    // Fixture: argmax A = [0,0,1,1], B = [0,1,1,0], truth [0,0,1,0].
    let a_data = [0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.4, 0.6];
    let b_data = [0.7, 0.3, 0.2, 0.8, 0.1, 0.9, 0.6, 0.4];
    let labels = [0usize, 0, 1, 0];

    let mut a = std::ptr::null_mut();
    let mut b = std::ptr::null_mut();
    unsafe {
        assert_eq!(
            consens_prediction_matrix_new(a_data.as_ptr(), 4, 2, &mut a),
            ConsensStatus::Ok
        );
        assert_eq!(
            consens_prediction_matrix_new(b_data.as_ptr(), 4, 2, &mut b),
            ConsensStatus::Ok
        );
        assert_eq!(consens_prediction_matrix_rows(a), 4);
        assert_eq!(consens_prediction_matrix_classes(a), 2);

        let mut con = 0.0;
        assert_eq!(consens_consistency(a, b, &mut con), ConsensStatus::Ok);
        assert_eq!(con, 0.5);

        let mut acc = 0.0;
        assert_eq!(consens_accuracy(a, labels.as_ptr(), 4, &mut acc), ConsensStatus::Ok);
        assert_eq!(acc, 0.75);

        let ks = [1usize, 2];
        let mut json = std::ptr::null_mut();
        assert_eq!(
            consens_pair_report_json(a, b, labels.as_ptr(), 4, ks.as_ptr(), 2, &mut json),
            ConsensStatus::Ok
        );
        let text = CStr::from_ptr(json).to_str().unwrap();
        let parsed: serde_json::Value = serde_json::from_str(text).unwrap();
        assert_eq!(parsed["con"], 0.5);
        assert_eq!(parsed["acc_con"], 0.5);
        assert_eq!(parsed["ccon_2"], 1.0);
        consens_string_free(json);

        consens_prediction_matrix_free(a);
        consens_prediction_matrix_free(b);
    }
}

#[test]
fn matrix_load_reports_parse_errors() {
    let dir = std::env::temp_dir().join(format!("consens-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("good.txt");
    std::fs::write(&good, "1 2\n5.0e-1 5.0e-1\n").unwrap();
    let bad = dir.join("bad.txt");
    std::fs::write(&bad, "1 2\nnot numbers\n").unwrap();

    let mut handle = std::ptr::null_mut();
    let good_path = CString::new(good.to_str().unwrap()).unwrap();
    let status = unsafe { consens_prediction_matrix_load(good_path.as_ptr(), &mut handle) };
    assert_eq!(status, ConsensStatus::Ok);
    unsafe {
        assert_eq!(consens_prediction_matrix_rows(handle), 1);
        consens_prediction_matrix_free(handle);
    }

    let bad_path = CString::new(bad.to_str().unwrap()).unwrap();
    let status = unsafe { consens_prediction_matrix_load(bad_path.as_ptr(), &mut handle) };
    assert_eq!(status, ConsensStatus::ParseError);
    assert!(last_error().contains("line 2"));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bound_suite_json_is_deterministic() {
    let run = |seed: u64| -> String {
        let mut json = std::ptr::null_mut();
        let status = unsafe { consens_verify_bounds_json(25, 10, seed, &mut json) };
        assert_eq!(status, ConsensStatus::Ok);
        let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_string();
        unsafe { consens_string_free(json) };
        text
    };
    let a = run(5);
    let b = run(5);
    assert_eq!(a, b);
    let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(parsed["total_violations"], 0);
}

#[test]
fn generated_header_declares_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("consens.h");
    let text = std::fs::read_to_string(header).expect("header generated at build time");
    for symbol in [
        "consens_euclidean_distance",
        "consens_prediction_matrix_new",
        "consens_pair_report_json",
        "consens_verify_bounds_json",
        "ConsensStatus",
        "ConsensPredictionMatrix",
    ] {
        assert!(text.contains(symbol), "header missing `{symbol}`");
    }
}
