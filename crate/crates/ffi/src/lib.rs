//! C ABI over `keyed_sfft`.
//!
//! Every handle is opaque and owned by the caller once returned; free it
//! with the matching `*_free`. Functions return an [`SfftStatus`]; on any
//! non-`Ok` status, [`sfft_last_error`] describes the failure on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use keyed_sfft::config::Config;
use keyed_sfft::pipeline::{sparse_fft, verify_certificate, Certificate, PipelineError, RecoveryPath, RecoveryResult};
use keyed_sfft::signal::{from_dense, synthesize, DenseSource, SignalSource, SparseSpectrum, SynthesizedSource};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfftStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    FallbackTooLarge = 4,
    Internal = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfftPath {
    FastPath = 0,
    Fallback = 1,
}

/// A signal: dense samples or a lazily synthesized sparse spectrum.
pub struct SfftSignal {
    inner: SignalKind,
}

enum SignalKind {
    Dense(DenseSource),
    Synth(SynthesizedSource),
}

impl SfftSignal {
    fn source(&self) -> &dyn SignalSource {
        match &self.inner {
            SignalKind::Dense(d) => d,
            SignalKind::Synth(s) => s,
        }
    }
}

pub struct SfftConfig {
    inner: Config,
}

pub struct SfftResult {
    inner: RecoveryResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: SfftStatus, msg: impl Into<String>) -> SfftStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SfftStatus) -> SfftStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SfftStatus::Panic, msg)
        }
    }
}

unsafe fn out_handle<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn complex_slice<'a>(re_im: *const f64, count: usize) -> &'a [f64] {
    if count == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(re_im, 2 * count)
    }
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn sfft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Wraps `len` interleaved `(re, im)` samples.
///
/// # Safety
/// `re_im` must point to `2 * len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfft_signal_from_dense(re_im: *const f64, len: usize, out: *mut *mut SfftSignal) -> SfftStatus {
    guard(|| {
        if out.is_null() || (re_im.is_null() && len > 0) {
            return fail(SfftStatus::NullPointer, "null argument");
        }
        let values = complex_slice(re_im, len);
        let samples: Vec<Complex64> = values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        match from_dense(samples, len as u64) {
            Ok(d) => {
                out_handle(out, SfftSignal { inner: SignalKind::Dense(d) });
                SfftStatus::Ok
            }
            Err(e) => fail(SfftStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// A signal synthesized from `count` tones on a grid of length `grid`.
/// `nominal_n` of zero means the grid itself is the nominal length.
///
/// # Safety
/// `freqs` must point to `count` integers and `re_im` to `2 * count` doubles.
#[no_mangle]
pub unsafe extern "C" fn sfft_signal_from_spectrum(
    grid: u64,
    freqs: *const u64,
    re_im: *const f64,
    count: usize,
    nominal_n: u64,
    out: *mut *mut SfftSignal,
) -> SfftStatus {
    guard(|| {
        if out.is_null() || (count > 0 && (freqs.is_null() || re_im.is_null())) {
            return fail(SfftStatus::NullPointer, "null argument");
        }
        let fs = if count == 0 { &[][..] } else { std::slice::from_raw_parts(freqs, count) };
        let values = complex_slice(re_im, count);
        let entries = fs.iter().zip(values.chunks_exact(2)).map(|(&f, c)| (f, Complex64::new(c[0], c[1])));
        match SparseSpectrum::new(grid, entries) {
            Ok(spec) => {
                let src = synthesize(spec);
                let src = if nominal_n > 0 { src.with_nominal_length(nominal_n) } else { src };
                out_handle(out, SfftSignal { inner: SignalKind::Synth(src) });
                SfftStatus::Ok
            }
            Err(e) => fail(SfftStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `signal` must come from a `sfft_signal_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn sfft_signal_free(signal: *mut SfftSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfft_config_default(out: *mut *mut SfftConfig) -> SfftStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfftStatus::NullPointer, "null argument");
        }
        out_handle(out, SfftConfig { inner: Config::default() });
        SfftStatus::Ok
    })
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfft_config_from_toml(toml: *const c_char, out: *mut *mut SfftConfig) -> SfftStatus {
    guard(|| {
        if toml.is_null() || out.is_null() {
            return fail(SfftStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            return fail(SfftStatus::Parse, "configuration is not UTF-8");
        };
        match Config::from_toml(text) {
            Ok(cfg) => {
                out_handle(out, SfftConfig { inner: cfg });
                SfftStatus::Ok
            }
            Err(e) => fail(SfftStatus::Parse, e.to_string()),
        }
    })
}

/// Pins the identification moduli.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn sfft_config_set_moduli(cfg: *mut SfftConfig, m1: u64, m2: u64, m3: u64) -> SfftStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(SfftStatus::NullPointer, "null config");
        };
        let next = Config { moduli: Some(vec![m1, m2, m3]), ..cfg.inner.clone() };
        match next.validate() {
            Ok(()) => {
                cfg.inner = next;
                SfftStatus::Ok
            }
            Err(e) => fail(SfftStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn sfft_config_set_force_fallback(cfg: *mut SfftConfig, on: bool) -> SfftStatus {
    guard(|| match cfg.as_mut() {
        Some(cfg) => {
            cfg.inner.force_fallback = on;
            SfftStatus::Ok
        }
        None => fail(SfftStatus::NullPointer, "null config"),
    })
}

/// # Safety
/// `cfg` must come from a `sfft_config_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn sfft_config_free(cfg: *mut SfftConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Recovers the `k` largest components. A null `cfg` uses the defaults.
///
/// # Safety
/// `signal` must be live, `cfg` live or null, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfft_transform(
    signal: *const SfftSignal,
    cfg: *const SfftConfig,
    k: usize,
    seed: u64,
    out: *mut *mut SfftResult,
) -> SfftStatus {
    guard(|| {
        let (Some(signal), false) = (signal.as_ref(), out.is_null()) else {
            return fail(SfftStatus::NullPointer, "null argument");
        };
        let default = Config::default();
        let cfg = cfg.as_ref().map_or(&default, |c| &c.inner);
        match sparse_fft(signal.source(), k, cfg, seed) {
            Ok(result) => {
                out_handle(out, SfftResult { inner: result });
                SfftStatus::Ok
            }
            Err(e @ PipelineError::FallbackTooLarge { .. }) => fail(SfftStatus::FallbackTooLarge, e.to_string()),
            Err(e) => fail(SfftStatus::Internal, e.to_string()),
        }
    })
}

/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn sfft_result_len(result: *const SfftResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.spectrum.len())
}

/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn sfft_result_grid(result: *const SfftResult) -> u64 {
    result.as_ref().map_or(0, |r| r.inner.spectrum.grid_length())
}

/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn sfft_result_path(result: *const SfftResult) -> SfftPath {
    match result.as_ref().map(|r| r.inner.path) {
        Some(RecoveryPath::FastPath) => SfftPath::FastPath,
        _ => SfftPath::Fallback,
    }
}

/// Total complex multiply-adds the run spent.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn sfft_result_total_ops(result: *const SfftResult) -> u64 {
    result.as_ref().map_or(0, |r| r.inner.op_counts.total)
}

/// Entry `index` in ascending frequency order.
///
/// # Safety
/// `result` must be live; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfft_result_entry(
    result: *const SfftResult,
    index: usize,
    f: *mut u64,
    re: *mut f64,
    im: *mut f64,
) -> SfftStatus {
    guard(|| {
        let Some(result) = result.as_ref() else {
            return fail(SfftStatus::NullPointer, "null result");
        };
        if f.is_null() || re.is_null() || im.is_null() {
            return fail(SfftStatus::NullPointer, "null output");
        }
        let Some(e) = result.inner.spectrum.entries().get(index) else {
            return fail(SfftStatus::InvalidArgument, format!("index {index} out of range"));
        };
        *f = e.f;
        *re = e.coeff.re;
        *im = e.coeff.im;
        SfftStatus::Ok
    })
}

/// The certificate as JSON; release it with [`sfft_string_free`].
///
/// # Safety
/// `result` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfft_result_certificate_json(result: *const SfftResult, out: *mut *mut c_char) -> SfftStatus {
    guard(|| {
        let (Some(result), false) = (result.as_ref(), out.is_null()) else {
            return fail(SfftStatus::NullPointer, "null argument");
        };
        let text = CString::new(result.inner.certificate.to_json()).expect("JSON has no nul bytes");
        *out = text.into_raw();
        SfftStatus::Ok
    })
}

/// # Safety
/// `result` must come from [`sfft_transform`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sfft_result_free(result: *mut SfftResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sfft_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Re-checks a certificate against `signal`; `violations` receives the
/// number of failed checks (zero means the certificate holds).
///
/// # Safety
/// `json` must be nul-terminated, `signal` live, `violations` writable.
#[no_mangle]
pub unsafe extern "C" fn sfft_verify_certificate(
    json: *const c_char,
    signal: *const SfftSignal,
    violations: *mut usize,
) -> SfftStatus {
    guard(|| {
        let (false, Some(signal), false) = (json.is_null(), signal.as_ref(), violations.is_null()) else {
            return fail(SfftStatus::NullPointer, "null argument");
        };
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(SfftStatus::Parse, "certificate is not UTF-8");
        };
        let cert = match Certificate::from_json(text) {
            Ok(c) => c,
            Err(e) => return fail(SfftStatus::Parse, e.to_string()),
        };
        match verify_certificate(&cert, signal.source()) {
            Ok(v) => {
                *violations = v.len();
                SfftStatus::Ok
            }
            Err(e) => fail(SfftStatus::InvalidArgument, e.to_string()),
        }
    })
}
