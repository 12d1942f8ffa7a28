//! C ABI over the cohortscope engine.
//!
//! Stores are opaque handles. Every call returns a [`CsStatus`]; on failure
//! the message is available from [`cs_last_error`] on the same thread.
//! Results are JSON strings owned by the caller and released with
//! [`cs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cohortscope::dataset::{load_dataset_dir, synthesize, BpType, DatasetError, SynthConfig};
use cohortscope::dsl::{compile, evaluate};
use cohortscope::vis::{build_bars, build_matrix, build_wrap, FoldConfig, MatrixParams, SortKey, VisError, WrapConfig};
use cohortscope::PatientStore;
use serde::Serialize;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    InvalidQuery = 4,
    InvalidArgument = 5,
    Io = 6,
    Internal = 7,
}

/// Opaque patient store.
pub struct CsStore {
    inner: PatientStore,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CsStatus, String);

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let status = match e {
            DatasetError::Io { .. } => CsStatus::Io,
            DatasetError::Invalid(_) => CsStatus::InvalidArgument,
            DatasetError::UnknownUid(_) => CsStatus::NotFound,
        };
        Failure(status, e.to_string())
    }
}

impl From<VisError> for Failure {
    fn from(e: VisError) -> Self {
        let status = match e {
            VisError::UnknownUid(_) => CsStatus::NotFound,
            _ => CsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CsStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CsStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(CsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn store_ref<'a>(p: *const CsStore) -> Result<&'a PatientStore, Failure> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| Failure(CsStatus::NullArgument, "store is null".into()))
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(CsStatus::NullArgument, "output pointer is null".into()));
    }
    Ok(())
}

unsafe fn write_json(out: *mut *mut c_char, value: &impl Serialize) -> Result<(), Failure> {
    let json = serde_json::to_string(value).map_err(|e| Failure(CsStatus::Internal, e.to_string()))?;
    let c = CString::new(json).map_err(|e| Failure(CsStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn positive(v: f64, what: &str) -> Result<f64, Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Failure(CsStatus::InvalidArgument, format!("{what} must be positive")))
    }
}

fn bp_type(s: Option<&str>) -> Result<BpType, Failure> {
    s.map_or(Ok(BpType::Sbp), |s| {
        s.parse().map_err(|_| Failure(CsStatus::InvalidArgument, format!("unknown bp type `{s}`")))
    })
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a dataset directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_store_load(dir: *const c_char, out: *mut *mut CsStore) -> CsStatus {
    guard(|| {
        check_out(out)?;
        let dir = text(dir, "dir")?;
        let inner = load_dataset_dir(Path::new(dir))?;
        *out = Box::into_raw(Box::new(CsStore { inner }));
        Ok(())
    })
}

/// Builds a seeded synthetic store of `n_patients`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_store_synthesize(n_patients: usize, seed: u64, out: *mut *mut CsStore) -> CsStatus {
    guard(|| {
        check_out(out)?;
        let (inner, _) = synthesize(&SynthConfig::new(n_patients, seed))?;
        *out = Box::into_raw(Box::new(CsStore { inner }));
        Ok(())
    })
}

/// Releases a store. Null is ignored.
///
/// # Safety
/// `store` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_store_free(store: *mut CsStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Number of patients, or 0 for a null store.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_store_len(store: *const CsStore) -> usize {
    store.as_ref().map_or(0, |s| s.inner.uids().len())
}

/// Evaluates a query; writes `{"count":n,"uids":[...]}`.
///
/// # Safety
/// `store` must be live, `dsl` NUL-terminated and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_query(store: *const CsStore, dsl: *const c_char, out_json: *mut *mut c_char) -> CsStatus {
    guard(|| {
        check_out(out_json)?;
        let store = store_ref(store)?;
        let dsl = text(dsl, "dsl")?;
        let query = compile(dsl, store.codebook()).map_err(|e| Failure(CsStatus::InvalidQuery, e.to_string()))?;
        let uids = evaluate(&query, store, None);
        write_json(out_json, &serde_json::json!({ "count": uids.len(), "uids": uids }))
    })
}

/// Folded matrix for the cohort selected by `dsl`. `bp_type` may be null
/// for systolic pressure.
///
/// # Safety
/// `store` must be live, strings NUL-terminated and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_matrix(
    store: *const CsStore,
    dsl: *const c_char,
    cycle_hours: f64,
    bp_type: *const c_char,
    out_json: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        check_out(out_json)?;
        let store = store_ref(store)?;
        let dsl = text(dsl, "dsl")?;
        let bp = self::bp_type(if bp_type.is_null() { None } else { Some(text(bp_type, "bp_type")?) })?;
        let cycle_hours = positive(cycle_hours, "cycle_hours")?;
        let query = compile(dsl, store.codebook()).map_err(|e| Failure(CsStatus::InvalidQuery, e.to_string()))?;
        let uids = evaluate(&query, store, None);
        let cfg = FoldConfig { cycle_hours, ..FoldConfig::for_series(bp) };
        let sort_key = SortKey::WindowMean { bp_type: bp, window: 0, cycle_hours };
        let params = MatrixParams { sort_key, ..MatrixParams::default() };
        write_json(out_json, &build_matrix(store, &uids, &cfg, &params)?)
    })
}

/// Slice-and-wrap geometry of one patient.
///
/// # Safety
/// `store` must be live, `uid` NUL-terminated and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_wrap(
    store: *const CsStore,
    uid: *const c_char,
    cycle_hours: f64,
    out_json: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        check_out(out_json)?;
        let store = store_ref(store)?;
        let uid = text(uid, "uid")?;
        let cfg = WrapConfig { cycle_hours: positive(cycle_hours, "cycle_hours")?, ..WrapConfig::default() };
        write_json(out_json, &build_wrap(store, uid, &cfg)?)
    })
}

/// Systolic baseline bars of one patient. Pass NaN as `baseline_high` for a
/// single threshold.
///
/// # Safety
/// `store` must be live, `uid` NUL-terminated and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_bars(
    store: *const CsStore,
    uid: *const c_char,
    baseline_low: f64,
    baseline_high: f64,
    out_json: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        check_out(out_json)?;
        let store = store_ref(store)?;
        let uid = text(uid, "uid")?;
        let high = (!baseline_high.is_nan()).then_some(baseline_high);
        write_json(out_json, &build_bars(store, uid, BpType::Sbp, baseline_low, high)?)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
