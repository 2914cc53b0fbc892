//! C interface to the crossroads pipeline.
//!
//! Every entry point returns an [`XrStatus`] and never unwinds across the
//! boundary. Objects are opaque handles released with their `_free`
//! function; strings returned through out-parameters are released with
//! [`xr_string_free`]. The message for the most recent failure on the calling
//! thread is available from [`xr_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use crossroads::bundle::load_bundle;
use crossroads::config::PipelineConfig;
use crossroads::evaluate::{report_csv, report_json, GroupBy};
use crossroads::pipeline::{process_bundle, ResultsDoc};
use crossroads::service::{self, ServiceError};

/// Result code of every `xr_` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Bundle = 4,
    Pipeline = 5,
    Evaluation = 6,
    Io = 7,
    InvalidJson = 8,
    /// The segment has no detected intersection.
    NotDetected = 9,
    Panic = 99,
}

/// Pipeline configuration.
pub struct XrConfig(PipelineConfig);

/// Results of processing one segment.
pub struct XrResults(ResultsDoc);

/// Entry and exit of a detected intersection.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct XrBounds {
    pub entry_frame: usize,
    pub exit_frame: usize,
    pub entry_distance_m: f64,
    pub exit_distance_m: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

struct Failure(XrStatus, String);

type FfiResult = Result<(), Failure>;

fn fail<T>(status: XrStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> FfiResult) -> XrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            XrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            XrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(XrStatus::NullArgument, format!("{name} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| fail(XrStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().map_or_else(|| fail(XrStatus::NullArgument, format!("{name} is null")), Ok)
}

fn check_out<T>(p: *mut T, name: &str) -> FfiResult {
    if p.is_null() {
        fail(XrStatus::NullArgument, format!("{name} is null"))
    } else {
        Ok(())
    }
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn service_status(e: &ServiceError) -> XrStatus {
    match e {
        ServiceError::Bundle(_) => XrStatus::Bundle,
        ServiceError::Pipeline(_) => XrStatus::Pipeline,
        ServiceError::Io { .. } | ServiceError::Csv(_) => XrStatus::Io,
        _ => XrStatus::Evaluation,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn xr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failed call on this thread, or an empty
/// string. Valid until the next `xr_` call on the same thread.
#[no_mangle]
pub extern "C" fn xr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn xr_config_default(out: *mut *mut XrConfig) -> XrStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = Box::into_raw(Box::new(XrConfig(PipelineConfig::default())));
        Ok(())
    })
}

/// Configuration parsed from TOML text; missing keys take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn xr_config_from_toml(toml: *const c_char, out: *mut *mut XrConfig) -> XrStatus {
    guard(|| {
        check_out(out, "out")?;
        let text = str_arg(toml, "toml")?;
        let cfg = PipelineConfig::from_toml_str(text).or_else(|e| fail(XrStatus::InvalidConfig, e.to_string()))?;
        *out = Box::into_raw(Box::new(XrConfig(cfg)));
        Ok(())
    })
}

/// Configuration as TOML text, released with `xr_string_free`.
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xr_config_to_toml(config: *const XrConfig, out: *mut *mut c_char) -> XrStatus {
    guard(|| {
        check_out(out, "out")?;
        let cfg = ref_arg(config, "config")?;
        *out = to_c_string(cfg.0.to_toml_string());
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xr_config_free(config: *mut XrConfig) {
    if !config.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(config))));
    }
}

/// Load the bundle directory at `bundle_dir` and run the full pipeline.
///
/// # Safety
/// `config` must come from this library, `bundle_dir` must be a
/// NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn xr_process_bundle(
    config: *const XrConfig,
    bundle_dir: *const c_char,
    out: *mut *mut XrResults,
) -> XrStatus {
    guard(|| {
        check_out(out, "out")?;
        let cfg = ref_arg(config, "config")?;
        let dir = PathBuf::from(str_arg(bundle_dir, "bundle_dir")?);
        let bundle = load_bundle(&dir).or_else(|e| fail(XrStatus::Bundle, e.to_string()))?;
        let doc = process_bundle(&bundle, &cfg.0).or_else(|e| fail(XrStatus::Pipeline, e.to_string()))?;
        *out = Box::into_raw(Box::new(XrResults(doc)));
        Ok(())
    })
}

/// Parse a results document previously written as JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn xr_results_from_json(json: *const c_char, out: *mut *mut XrResults) -> XrStatus {
    guard(|| {
        check_out(out, "out")?;
        let text = str_arg(json, "json")?;
        let doc: ResultsDoc = serde_json::from_str(text).or_else(|e| fail(XrStatus::InvalidJson, e.to_string()))?;
        *out = Box::into_raw(Box::new(XrResults(doc)));
        Ok(())
    })
}

/// The results document as JSON, byte-identical to the CLI's results.json.
///
/// # Safety
/// `results` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xr_results_to_json(results: *const XrResults, out: *mut *mut c_char) -> XrStatus {
    guard(|| {
        check_out(out, "out")?;
        let r = ref_arg(results, "results")?;
        *out = to_c_string(r.0.to_json());
        Ok(())
    })
}

/// Bounds of the detected intersection; `XR_STATUS_NOT_DETECTED` when the
/// pipeline reported a failure instead.
///
/// # Safety
/// `results` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xr_results_bounds(results: *const XrResults, out: *mut XrBounds) -> XrStatus {
    guard(|| {
        check_out(out, "out")?;
        let r = ref_arg(results, "results")?;
        match r.0.outcome.result() {
            Some(res) => {
                *out = XrBounds {
                    entry_frame: res.entry_frame,
                    exit_frame: res.exit_frame,
                    entry_distance_m: res.entry_distance,
                    exit_distance_m: res.exit_distance,
                };
                Ok(())
            }
            None => fail(XrStatus::NotDetected, format!("{}: no intersection detected", r.0.segment_id)),
        }
    })
}

/// Head scans of the segment as CSV.
///
/// # Safety
/// `results` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xr_results_scans_csv(results: *const XrResults, out: *mut *mut c_char) -> XrStatus {
    guard(|| {
        check_out(out, "out")?;
        let r = ref_arg(results, "results")?;
        let csv = crossroads::headscan::scans_to_csv(&r.0.evidence.scans, &r.0.evidence.timestamps_ms)
            .or_else(|e| fail(XrStatus::Io, e.to_string()))?;
        *out = to_c_string(csv);
        Ok(())
    })
}

/// # Safety
/// `results` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xr_results_free(results: *mut XrResults) {
    if !results.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(results))));
    }
}

/// Evaluate `results_dir/<segment>/results.json` against the ground truth
/// under `truth_dir`. `group_by` is one of `none`, `signage`, `maneuver`,
/// `table`, or null for `table`. Either out-parameter may be null.
///
/// # Safety
/// String arguments must be NUL-terminated; non-null outs must be writable.
#[no_mangle]
pub unsafe extern "C" fn xr_evaluate_dirs(
    config: *const XrConfig,
    results_dir: *const c_char,
    truth_dir: *const c_char,
    group_by: *const c_char,
    out_json: *mut *mut c_char,
    out_csv: *mut *mut c_char,
) -> XrStatus {
    guard(|| {
        let cfg = ref_arg(config, "config")?;
        let results = PathBuf::from(str_arg(results_dir, "results_dir")?);
        let truth = PathBuf::from(str_arg(truth_dir, "truth_dir")?);
        let grouping: GroupBy = if group_by.is_null() {
            GroupBy::default()
        } else {
            str_arg(group_by, "group_by")?.parse().or_else(|e: String| fail(XrStatus::Evaluation, e))?
        };
        let report = service::evaluate_dirs(&results, &truth, grouping, &cfg.0)
            .or_else(|e| fail(service_status(&e), e.to_string()))?;
        let csv = report_csv(&report).or_else(|e| fail(XrStatus::Io, e.to_string()))?;
        if !out_json.is_null() {
            *out_json = to_c_string(report_json(&report));
        }
        if !out_csv.is_null() {
            *out_csv = to_c_string(csv);
        }
        Ok(())
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xr_string_free(s: *mut c_char) {
    if !s.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(CString::from_raw(s))));
    }
}
