//! C ABI over `mia-core`.
//!
//! Conventions:
//! - Every fallible call returns a [`MiaStatus`]; results go through out
//!   pointers that are written only on success.
//! - After a failure, [`mia_last_error_message`] returns a NUL-terminated
//!   description owned by the library, valid until the next call on the same
//!   thread.
//! - Handles ([`MiaDataset`], [`MiaScoreTable`], [`MiaModel`]) are opaque and
//!   must be released with their `*_free` function. Passing NULL to a free
//!   function is a no-op.
//! - Panics never cross the boundary; they surface as `MIA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mia_core::attack::{load_checkpoint, score_dataset_improved, AttackModel};
use mia_core::eval::{auc, tpr_at_fpr};
use mia_core::pipeline::{cmd_pipeline, run_in_output_dir, PipelineConfig};
use mia_core::scoring::{self, score_dataset, Level, Metric, ScoreTable};
use mia_core::store::{Dataset, Frames, Membership};
use mia_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Validation = 5,
    DegenerateVector = 6,
    TooFewFrames = 7,
    TooFewUtterances = 8,
    InsufficientData = 9,
    InsufficientPairs = 10,
    Config = 11,
    Data = 12,
    Evaluation = 13,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiaLevel {
    Utterance = 0,
    Speaker = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiaMetric {
    Cosine = 0,
    Euclidean = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiaMembership {
    Unknown = 0,
    Seen = 1,
    Unseen = 2,
}

/// A loaded feature dataset.
pub struct MiaDataset(Dataset);

/// A table of per-utterance or per-speaker scores.
pub struct MiaScoreTable(ScoreTable);

/// A trained attack network.
pub struct MiaModel(AttackModel);

impl From<MiaLevel> for Level {
    fn from(l: MiaLevel) -> Level {
        match l {
            MiaLevel::Utterance => Level::Utterance,
            MiaLevel::Speaker => Level::Speaker,
        }
    }
}

impl From<Level> for MiaLevel {
    fn from(l: Level) -> MiaLevel {
        match l {
            Level::Utterance => MiaLevel::Utterance,
            Level::Speaker => MiaLevel::Speaker,
        }
    }
}

impl From<MiaMetric> for Metric {
    fn from(m: MiaMetric) -> Metric {
        match m {
            MiaMetric::Cosine => Metric::Cosine,
            MiaMetric::Euclidean => Metric::Euclidean,
        }
    }
}

impl From<Membership> for MiaMembership {
    fn from(m: Membership) -> MiaMembership {
        match m {
            Membership::Unknown => MiaMembership::Unknown,
            Membership::Seen => MiaMembership::Seen,
            Membership::Unseen => MiaMembership::Unseen,
        }
    }
}

fn status_of(e: &Error) -> MiaStatus {
    match e {
        Error::Io { .. } => MiaStatus::Io,
        Error::Format { .. } | Error::Json(_) | Error::Csv(_) => MiaStatus::Format,
        Error::Validation(_) => MiaStatus::Validation,
        Error::DegenerateVector { .. } => MiaStatus::DegenerateVector,
        Error::TooFewFrames { .. } => MiaStatus::TooFewFrames,
        Error::TooFewUtterances { .. } => MiaStatus::TooFewUtterances,
        Error::InsufficientData { .. } => MiaStatus::InsufficientData,
        Error::InsufficientPairs { .. } => MiaStatus::InsufficientPairs,
        Error::Config(_) => MiaStatus::Config,
        Error::Data(_) => MiaStatus::Data,
        Error::Evaluation(_) => MiaStatus::Evaluation,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

/// Internal failure carrying the status and message for the caller.
struct Failure(MiaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MiaStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(MiaStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MiaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MiaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            MiaStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mia_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread ("" after a success).
#[no_mangle]
pub extern "C" fn mia_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Opens the dataset described by an NDJSON manifest.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mia_dataset_open(manifest_path: *const c_char, out: *mut *mut MiaDataset) -> MiaStatus {
    guard(|| {
        let path = path_arg(manifest_path, "manifest_path")?;
        let out = out_arg(out, "out")?;
        let ds = Dataset::open(path)?;
        *out = Box::into_raw(Box::new(MiaDataset(ds)));
        Ok(())
    })
}

/// Number of utterances in the dataset; 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mia_dataset_len(dataset: *const MiaDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Feature dimension `q`; 0 for NULL or an empty dataset.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mia_dataset_dim(dataset: *const MiaDataset) -> usize {
    dataset.as_ref().and_then(|d| d.0.dim()).unwrap_or(0)
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mia_dataset_free(dataset: *mut MiaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Basic attack over a dataset. Items that cannot be scored are left out
/// of the table and counted in `skipped` (may be NULL).
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable; `skipped` must be
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mia_score_dataset(
    dataset: *const MiaDataset,
    level: MiaLevel,
    metric: MiaMetric,
    out: *mut *mut MiaScoreTable,
    skipped: *mut usize,
) -> MiaStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let out = out_arg(out, "out")?;
        let outcome = score_dataset(&ds.0, level.into(), metric.into())?;
        if let Some(s) = skipped.as_mut() {
            *s = outcome.skipped.len();
        }
        *out = Box::into_raw(Box::new(MiaScoreTable(outcome.table)));
        Ok(())
    })
}

/// Reads an `id,score,membership` CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mia_score_table_read_csv(
    path: *const c_char,
    level: MiaLevel,
    out: *mut *mut MiaScoreTable,
) -> MiaStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let table = ScoreTable::read_csv(level.into(), path)?;
        *out = Box::into_raw(Box::new(MiaScoreTable(table)));
        Ok(())
    })
}

/// Writes the table as `id,score,membership` CSV.
///
/// # Safety
/// `table` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mia_score_table_write_csv(table: *const MiaScoreTable, path: *const c_char) -> MiaStatus {
    guard(|| {
        let table = handle(table, "table")?;
        let path = path_arg(path, "path")?;
        table.0.write_csv(path)?;
        Ok(())
    })
}

/// Row count; 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mia_score_table_len(table: *const MiaScoreTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Score and membership of row `index`. Either out pointer may be NULL.
///
/// # Safety
/// `table` must be a live handle; out pointers NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mia_score_table_row(
    table: *const MiaScoreTable,
    index: usize,
    score: *mut f64,
    membership: *mut MiaMembership,
) -> MiaStatus {
    guard(|| {
        let table = handle(table, "table")?;
        let row = table
            .0
            .rows()
            .get(index)
            .ok_or_else(|| invalid(format!("row {index} out of range (len {})", table.0.len())))?;
        if let Some(s) = score.as_mut() {
            *s = row.score;
        }
        if let Some(m) = membership.as_mut() {
            *m = row.membership.into();
        }
        Ok(())
    })
}

/// # Safety
/// `table` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mia_score_table_free(table: *mut MiaScoreTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Area under the ROC curve of a labeled table.
///
/// # Safety
/// `table` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mia_auc(table: *const MiaScoreTable, out: *mut f64) -> MiaStatus {
    guard(|| {
        let table = handle(table, "table")?;
        let out = out_arg(out, "out")?;
        *out = auc(&table.0)?;
        Ok(())
    })
}

/// Highest TPR among thresholds with FPR at most `fpr_target`.
///
/// # Safety
/// `table` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mia_tpr_at_fpr(table: *const MiaScoreTable, fpr_target: f64, out: *mut f64) -> MiaStatus {
    guard(|| {
        let table = handle(table, "table")?;
        let out = out_arg(out, "out")?;
        *out = tpr_at_fpr(&table.0, fpr_target)?;
        Ok(())
    })
}

/// Utterance score of an `m x q` row-major frame matrix.
///
/// # Safety
/// `frames` must point to `m * q` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mia_utterance_score(
    frames: *const f64,
    m: usize,
    q: usize,
    metric: MiaMetric,
    out: *mut f64,
) -> MiaStatus {
    guard(|| {
        let len = m.checked_mul(q).ok_or_else(|| invalid("m * q overflows"))?;
        let data = slice_arg(frames, len, "frames")?;
        let out = out_arg(out, "out")?;
        let frames = Frames::new(m, q, data.to_vec())?;
        *out = scoring::utterance_score(&frames, metric.into())?;
        Ok(())
    })
}

/// Cosine similarity of two vectors of length `len`.
///
/// # Safety
/// `a` and `b` must point to `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mia_cosine_similarity(a: *const f64, b: *const f64, len: usize, out: *mut f64) -> MiaStatus {
    guard(|| {
        let a = slice_arg(a, len, "a")?;
        let b = slice_arg(b, len, "b")?;
        let out = out_arg(out, "out")?;
        *out = scoring::cosine_similarity(a, b)?;
        Ok(())
    })
}

/// Loads a trained attack network from a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mia_model_load(path: *const c_char, out: *mut *mut MiaModel) -> MiaStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let (model, _) = load_checkpoint(path)?;
        *out = Box::into_raw(Box::new(MiaModel(model)));
        Ok(())
    })
}

/// Attack level of the model.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mia_model_level(model: *const MiaModel, out: *mut MiaLevel) -> MiaStatus {
    guard(|| {
        let model = handle(model, "model")?;
        *out_arg(out, "out")? = model.0.level().into();
        Ok(())
    })
}

/// Feature dimension the model expects.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mia_model_q(model: *const MiaModel, out: *mut usize) -> MiaStatus {
    guard(|| {
        let model = handle(model, "model")?;
        *out_arg(out, "out")? = model.0.q();
        Ok(())
    })
}

/// Improved attack over a dataset, at the model's level.
///
/// # Safety
/// `model` and `dataset` must be live handles; `out` writable; `skipped`
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mia_model_score_dataset(
    model: *const MiaModel,
    dataset: *const MiaDataset,
    out: *mut *mut MiaScoreTable,
    skipped: *mut usize,
) -> MiaStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let ds = handle(dataset, "dataset")?;
        let out = out_arg(out, "out")?;
        let outcome = score_dataset_improved(&ds.0, &model.0)?;
        if let Some(s) = skipped.as_mut() {
            *s = outcome.skipped.len();
        }
        *out = Box::into_raw(Box::new(MiaScoreTable(outcome.table)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mia_model_free(model: *mut MiaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the full pipeline from a JSON config file into `out_dir`, exactly as
/// `mia pipeline --config <config_path> --out <out_dir>` does. `overwrite` is
/// nonzero to empty a non-empty `out_dir`.
///
/// # Safety
/// `config_path` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn mia_run_pipeline(
    config_path: *const c_char,
    out_dir: *const c_char,
    overwrite: i32,
) -> MiaStatus {
    guard(|| {
        let config = path_arg(config_path, "config_path")?;
        let out = path_arg(out_dir, "out_dir")?;
        let cfg = PipelineConfig::read(config)?;
        run_in_output_dir(&out, overwrite != 0, |dir| cmd_pipeline(&cfg, dir))?;
        Ok(())
    })
}
