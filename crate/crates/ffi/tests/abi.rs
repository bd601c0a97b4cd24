use std::ffi::{CStr, CString};
use std::ptr;

use keyed_sfft_ffi::*;

fn last_error() -> String {
    let p = sfft_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn worked_signal() -> *mut SfftSignal {
    let freqs = [7u64, 41];
    let re_im = [1.0, 0.0, 0.5, -0.5];
    let mut signal = ptr::null_mut();
    assert_eq!(sfft_signal_from_spectrum(1001, freqs.as_ptr(), re_im.as_ptr(), 2, 0, &mut signal), SfftStatus::Ok);
    signal
}

#[test]
fn transform_round_trip() {
    unsafe {
        let signal = worked_signal();
        let mut cfg = ptr::null_mut();
        assert_eq!(sfft_config_default(&mut cfg), SfftStatus::Ok);
        assert_eq!(sfft_config_set_moduli(cfg, 7, 11, 13), SfftStatus::Ok);
        let mut result = ptr::null_mut();
        assert_eq!(sfft_transform(signal, cfg, 2, 3, &mut result), SfftStatus::Ok);
        assert_eq!(sfft_result_len(result), 2);
        assert_eq!(sfft_result_grid(result), 1001);
        assert_eq!(sfft_result_path(result), SfftPath::FastPath);
        assert!(sfft_result_total_ops(result) > 0);
        let (mut f, mut re, mut im) = (0u64, 0.0, 0.0);
        assert_eq!(sfft_result_entry(result, 1, &mut f, &mut re, &mut im), SfftStatus::Ok);
        assert_eq!(f, 41);
        assert!((re - 0.5).abs() < 1e-9 && (im + 0.5).abs() < 1e-9);
        assert_eq!(sfft_result_entry(result, 2, &mut f, &mut re, &mut im), SfftStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        let mut json = ptr::null_mut();
        assert_eq!(sfft_result_certificate_json(result, &mut json), SfftStatus::Ok);
        let mut violations = usize::MAX;
        assert_eq!(sfft_verify_certificate(json, signal, &mut violations), SfftStatus::Ok);
        assert_eq!(violations, 0);

        sfft_string_free(json);
        sfft_result_free(result);
        sfft_config_free(cfg);
        sfft_signal_free(signal);
    }
}

#[test]
fn forced_fallback_reports_its_path() {
    unsafe {
        let signal = worked_signal();
        let toml = CString::new("force_fallback = true\nmoduli = [7, 11, 13]").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(sfft_config_from_toml(toml.as_ptr(), &mut cfg), SfftStatus::Ok);
        let mut result = ptr::null_mut();
        assert_eq!(sfft_transform(signal, cfg, 2, 0, &mut result), SfftStatus::Ok);
        assert_eq!(sfft_result_path(result), SfftPath::Fallback);
        assert_eq!(sfft_result_len(result), 2);
        sfft_result_free(result);
        assert_eq!(sfft_config_set_force_fallback(cfg, false), SfftStatus::Ok);
        sfft_config_free(cfg);
        sfft_signal_free(signal);
    }
}

#[test]
fn dense_signals_and_default_config() {
    unsafe {
        let n = 64usize;
        let re_im: Vec<f64> = (0..n)
            .flat_map(|j| {
                let a = std::f64::consts::TAU * 5.0 * j as f64 / n as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        let mut signal = ptr::null_mut();
        assert_eq!(sfft_signal_from_dense(re_im.as_ptr(), n, &mut signal), SfftStatus::Ok);
        let mut result = ptr::null_mut();
        assert_eq!(sfft_transform(signal, ptr::null(), 1, 0, &mut result), SfftStatus::Ok);
        assert!(sfft_result_len(result) >= 1);
        sfft_result_free(result);
        sfft_signal_free(signal);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut signal = ptr::null_mut();
        assert_eq!(sfft_signal_from_dense(ptr::null(), 4, &mut signal), SfftStatus::NullPointer);
        assert!(last_error().contains("null"));

        let freqs = [2000u64];
        let re_im = [1.0, 0.0];
        assert_eq!(
            sfft_signal_from_spectrum(1001, freqs.as_ptr(), re_im.as_ptr(), 1, 0, &mut signal),
            SfftStatus::InvalidArgument
        );

        let bad = CString::new("alpha = \"many\"").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(sfft_config_from_toml(bad.as_ptr(), &mut cfg), SfftStatus::Parse);

        assert_eq!(sfft_config_default(&mut cfg), SfftStatus::Ok);
        assert_eq!(sfft_config_set_moduli(cfg, 6, 9, 13), SfftStatus::InvalidArgument);
        sfft_config_free(cfg);

        let garbage = CString::new("{not json").unwrap();
        let signal = worked_signal();
        let mut violations = 0usize;
        assert_eq!(sfft_verify_certificate(garbage.as_ptr(), signal, &mut violations), SfftStatus::Parse);
        sfft_signal_free(signal);

        assert_eq!(sfft_transform(ptr::null(), ptr::null(), 1, 0, ptr::null_mut()), SfftStatus::NullPointer);
        sfft_signal_free(ptr::null_mut());
        sfft_result_free(ptr::null_mut());
        sfft_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_the_last_error() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(sfft_config_set_force_fallback(ptr::null_mut(), true), SfftStatus::NullPointer);
        assert_eq!(sfft_config_default(&mut cfg), SfftStatus::Ok);
        assert!(sfft_last_error().is_null());
        sfft_config_free(cfg);
    }
}
