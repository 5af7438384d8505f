//! C ABI for the prodcat pipeline.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a
//! [`ProdcatStatus`]; on failure, [`prodcat_last_error`] describes the most
//! recent error on the calling thread. Strings passed in must be
//! NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use prodcat::config::{parse_config, PipelineConfig};
use prodcat::dataset::{generate_synthetic, load_table, Dataset, SyntheticConfig, TableFormat};
use prodcat::ensemble::{load_model, predict_products, save_model, train_ensemble, EnsembleModel};
use prodcat::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProdcatStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string was not UTF-8, or an index or enum value was out of range.
    InvalidArgument = 2,
    Io = 3,
    /// Malformed or incompatible table data.
    Data = 4,
    /// Invalid configuration or hyperparameters.
    Config = 5,
    /// A target has fewer than two classes.
    DegenerateLabels = 6,
    /// Model file with the wrong version or corrupt contents.
    Model = 7,
    /// Internal error; the library caught a panic.
    Internal = 8,
}

/// Prediction targets, for [`prodcat_predictions_label`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProdcatTarget {
    TopCategory = 0,
    BottomCategory = 1,
    Color = 2,
}

/// A loaded or generated table.
pub struct ProdcatDataset {
    inner: Dataset,
}

/// A trained ensemble.
pub struct ProdcatModel {
    inner: EnsembleModel,
}

/// Per-row labels for the three targets.
pub struct ProdcatPredictions {
    rows: Vec<[CString; 3]>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ProdcatStatus {
    match e {
        Error::Io { .. } => ProdcatStatus::Io,
        Error::Csv(_)
        | Error::RaggedRow { .. }
        | Error::UnknownFormat(_)
        | Error::ParquetDisabled
        | Error::Schema(_)
        | Error::MissingColumn(_)
        | Error::Shape(_)
        | Error::FullyMissingColumn(_) => ProdcatStatus::Data,
        Error::InvalidParam(_) | Error::Config(_) => ProdcatStatus::Config,
        Error::DegenerateLabels(_) => ProdcatStatus::DegenerateLabels,
        Error::VersionMismatch { .. } | Error::CorruptModel(_) => ProdcatStatus::Model,
        #[allow(unreachable_patterns)]
        _ => ProdcatStatus::Data,
    }
}

struct Fail(ProdcatStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ProdcatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ProdcatStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            ProdcatStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(ProdcatStatus::NullArgument, format!("{what} is NULL"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail(ProdcatStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn prodcat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or an empty string after
/// a successful call. Valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn prodcat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a CSV table (with its optional `.schema.toml` sidecar).
///
/// # Safety
/// `path` must be a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prodcat_dataset_load_csv(
    path: *const c_char,
    out: *mut *mut ProdcatDataset,
) -> ProdcatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let inner = load_table(&path, TableFormat::Csv)?;
        put(out, ProdcatDataset { inner });
        Ok(())
    })
}

/// Generates a synthetic catalog with default generator settings.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prodcat_dataset_synthesize(
    rows: usize,
    seed: u64,
    out: *mut *mut ProdcatDataset,
) -> ProdcatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = generate_synthetic(&SyntheticConfig {
            n_rows: rows,
            seed,
            ..Default::default()
        })?;
        put(out, ProdcatDataset { inner });
        Ok(())
    })
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prodcat_dataset_row_count(dataset: *const ProdcatDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.row_count())
}

/// # Safety
/// `dataset` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn prodcat_dataset_free(dataset: *mut ProdcatDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Trains the ensemble. `config_path` may be NULL for the default config.
///
/// # Safety
/// `dataset` must be a live handle, `config_path` NULL or a valid C string,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prodcat_model_train(
    dataset: *const ProdcatDataset,
    config_path: *const c_char,
    out: *mut *mut ProdcatModel,
) -> ProdcatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let data = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let config = if config_path.is_null() {
            PipelineConfig::default()
        } else {
            parse_config(&path_arg(config_path, "config_path")?)?
        };
        let inner = train_ensemble(&data.inner, &config)?;
        put(out, ProdcatModel { inner });
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn prodcat_model_save(
    model: *const ProdcatModel,
    path: *const c_char,
) -> ProdcatStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let path = path_arg(path, "path")?;
        save_model(&model.inner, &path)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prodcat_model_load(
    path: *const c_char,
    out: *mut *mut ProdcatModel,
) -> ProdcatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let inner = load_model(&path)?;
        put(out, ProdcatModel { inner });
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn prodcat_model_free(model: *mut ProdcatModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts all three targets for every row of `dataset`.
///
/// # Safety
/// `model` and `dataset` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prodcat_predict(
    model: *const ProdcatModel,
    dataset: *const ProdcatDataset,
    out: *mut *mut ProdcatPredictions,
) -> ProdcatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let data = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let records = predict_products(&model.inner, &data.inner)?;
        let c = |s: String| CString::new(s).unwrap_or_default();
        let rows = records
            .into_iter()
            .map(|r| [c(r.top_category), c(r.bottom_category), c(r.color)])
            .collect();
        put(out, ProdcatPredictions { rows });
        Ok(())
    })
}

/// Number of predicted rows, or 0 for NULL.
///
/// # Safety
/// `predictions` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prodcat_predictions_len(predictions: *const ProdcatPredictions) -> usize {
    predictions.as_ref().map_or(0, |p| p.rows.len())
}

/// Label predicted for `row` and `target` (a [`ProdcatTarget`] value). The
/// string stays valid until the predictions handle is freed.
///
/// # Safety
/// `predictions` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prodcat_predictions_label(
    predictions: *const ProdcatPredictions,
    row: usize,
    target: u32,
    out: *mut *const c_char,
) -> ProdcatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = predictions.as_ref().ok_or_else(|| null("predictions"))?;
        let labels = p.rows.get(row).ok_or_else(|| {
            Fail(
                ProdcatStatus::InvalidArgument,
                format!("row {row} out of range for {} predictions", p.rows.len()),
            )
        })?;
        let label = labels.get(target as usize).ok_or_else(|| {
            Fail(ProdcatStatus::InvalidArgument, format!("unknown target {target}"))
        })?;
        *out = label.as_ptr();
        Ok(())
    })
}

/// # Safety
/// `predictions` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn prodcat_predictions_free(predictions: *mut ProdcatPredictions) {
    if !predictions.is_null() {
        drop(Box::from_raw(predictions));
    }
}
