//! C ABI for multi-split inference.
//!
//! Data sets and results are opaque handles created and freed by this
//! library. Every fallible call returns an [`MsStatus`]; on failure the
//! message is available from [`ms_last_error_message`] on the same thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use multisplit::screening::LassoSettings;
use multisplit::{
    analyze, read_dataset, Analysis, AnalysisSettings, Dataset, Error, MultiSplitConfig, PValueMode, ResponseColumn,
    RngSpec, Rule, Screener,
};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Io = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsScreener {
    Fixed = 0,
    Cv = 1,
    Adap = 2,
    /// Uniformly random set of `random_size` variables.
    Random = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsRule {
    Fwer = 0,
    Fdr = 1,
    FdrCorrected = 2,
    Ev = 3,
    SingleSplit = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsPValueMode {
    Normal = 0,
    StudentT = 1,
}

/// Analysis settings. Enum-valued fields hold the integer values of
/// `MsScreener`, `MsRule` and `MsPValueMode`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsConfig {
    pub splits: usize,
    pub screener: u32,
    pub random_size: usize,
    pub rule: u32,
    pub pvalue_mode: u32,
    pub alpha: f64,
    pub q: f64,
    pub gamma_min: f64,
    pub k: f64,
    pub seed: u64,
}

/// Opaque data set handle.
pub struct MsDataset(Dataset);

/// Opaque analysis result handle.
pub struct MsResult(Analysis);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MsStatus {
    match e {
        Error::Io { .. } | Error::Csv(_) => MsStatus::Io,
        e if e.is_numerical() => MsStatus::Numerical,
        _ => MsStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MsStatus, String)>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MsStatus::Panic
        }
    }
}

fn fail(e: Error) -> (MsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MsStatus, String) {
    (MsStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Defaults: 50 splits, adaptive-Lasso screening, FWER at 0.05, q = 0.05,
/// gamma_min = 0.05, K = 20, normal p-values, seed 1.
#[no_mangle]
pub extern "C" fn ms_config_default() -> MsConfig {
    MsConfig {
        splits: 50,
        screener: MsScreener::Adap as u32,
        random_size: 0,
        rule: MsRule::Fwer as u32,
        pvalue_mode: MsPValueMode::Normal as u32,
        alpha: 0.05,
        q: 0.05,
        gamma_min: 0.05,
        k: 20.0,
        seed: 1,
    }
}

fn settings_from(c: &MsConfig) -> Result<AnalysisSettings, (MsStatus, String)> {
    let bad = |what: &str, v: u32| (MsStatus::InvalidInput, format!("unknown {what} value {v}"));
    let screener = match c.screener {
        0 => Screener::Fixed,
        1 => Screener::Cv,
        2 => Screener::Adap,
        3 => Screener::Random(c.random_size),
        v => return Err(bad("screener", v)),
    };
    let rule = match c.rule {
        0 => Rule::Fwer,
        1 => Rule::Fdr,
        2 => Rule::FdrCorrected,
        3 => Rule::Ev,
        4 => Rule::SingleSplit,
        v => return Err(bad("rule", v)),
    };
    let pvalue_mode = match c.pvalue_mode {
        0 => PValueMode::Normal,
        1 => PValueMode::StudentT,
        v => return Err(bad("p-value mode", v)),
    };
    Ok(AnalysisSettings {
        multisplit: MultiSplitConfig { splits: c.splits, screener, pvalue_mode, lasso: LassoSettings::default() },
        rule,
        alpha: c.alpha,
        q: c.q,
        gamma_min: c.gamma_min,
        k: c.k,
    })
}

/// Builds a data set from `y` (length `n`) and `x` (`n * p` values, column
/// major). The data are copied.
///
/// # Safety
/// `y` and `x` must point to `n` and `n * p` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_new(
    y: *const f64,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut MsDataset,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if y.is_null() || x.is_null() {
            return Err(null("data pointer"));
        }
        let len = n.checked_mul(p).ok_or((MsStatus::InvalidInput, "n * p overflows".to_string()))?;
        let yv = DVector::from_column_slice(std::slice::from_raw_parts(y, n));
        let xm = DMatrix::from_column_slice(n, p, std::slice::from_raw_parts(x, len));
        let ds = Dataset::new(yv, xm, None).map_err(fail)?;
        *out = Box::into_raw(Box::new(MsDataset(ds)));
        Ok(())
    })
}

/// Reads a CSV file. `response_column` is 1-based.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_from_csv(
    path: *const c_char,
    has_header: bool,
    delimiter: c_char,
    response_column: usize,
    out: *mut *mut MsDataset,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (MsStatus::InvalidInput, "path is not UTF-8".to_string()))?;
        let ds = read_dataset(path, has_header, delimiter as u8, &ResponseColumn::Index(response_column))
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(MsDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_free(dataset: *mut MsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of observations; 0 for a null handle.
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_n(dataset: *const MsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n())
}

/// Number of predictors; 0 for a null handle.
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_p(dataset: *const MsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.p())
}

/// Runs the analysis. Results depend only on the data and `config`.
///
/// # Safety
/// `dataset` and `config` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_analyze(
    dataset: *const MsDataset,
    config: *const MsConfig,
    out: *mut *mut MsResult,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let ds = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let settings = settings_from(cfg)?;
        let res = analyze(&ds.0, &settings, &RngSpec::new(cfg.seed)).map_err(fail)?;
        *out = Box::into_raw(Box::new(MsResult(res)));
        Ok(())
    })
}

/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ms_result_free(result: *mut MsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of variables `p`; 0 for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ms_result_num_variables(result: *const MsResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.selection.pvalues.len())
}

/// Number of splits `B`; 0 for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ms_result_num_splits(result: *const MsResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.matrix.splits())
}

/// Number of selected variables; 0 for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ms_result_num_selected(result: *const MsResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.selection.selected.len())
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, len: usize) -> Result<(), (MsStatus, String)> {
    if dst.is_null() && !src.is_empty() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err((MsStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    if !src.is_empty() {
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

/// Copies the `p` p-values the rule acted on into `buffer`.
///
/// # Safety
/// `buffer` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_result_pvalues(result: *const MsResult, buffer: *mut f64, len: usize) -> MsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        copy_out(&r.0.selection.pvalues, buffer, len)
    })
}

/// Copies the selected variables (0-based, ascending) into `buffer`.
///
/// # Safety
/// `buffer` must hold `len` writable `size_t` values.
#[no_mangle]
pub unsafe extern "C" fn ms_result_selected(result: *const MsResult, buffer: *mut usize, len: usize) -> MsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        copy_out(&r.0.selection.selected, buffer, len)
    })
}

/// Copies the `B x p` per-split adjusted p-values, row major, into `buffer`.
///
/// # Safety
/// `buffer` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_result_split_pvalues(result: *const MsResult, buffer: *mut f64, len: usize) -> MsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let m = &r.0.matrix.values;
        let rows: Vec<f64> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        copy_out(&rows, buffer, len)
    })
}
