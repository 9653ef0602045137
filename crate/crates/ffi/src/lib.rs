//! C ABI for the metaadapt engine.
//!
//! Conventions: functions return an error code (`MADP_OK` on success);
//! `madp_last_error` holds a message for the most recent failure on the
//! calling thread. Strings are NUL-terminated UTF-8. The model handle is
//! opaque; free it with `madp_model_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use metaadapt::checkpoint;
use metaadapt::cli::{cmd_adapt, gradcheck_errors, GradcheckArgs, GradcheckMode, RunConfig};
use metaadapt::data;
use metaadapt::error::Error;
use metaadapt::eval;
use metaadapt::model::{featurize, predict, ModelSlots, ModelSpec};
use metaadapt::params::ParameterVector;

pub const MADP_OK: c_int = 0;
/// Invalid configuration (bad hyperparameter, malformed config JSON).
pub const MADP_ERR_CONFIG: c_int = 1;
/// Unusable input data (missing file, malformed dataset, bad checkpoint).
pub const MADP_ERR_DATA: c_int = 2;
/// A non-finite value was produced during computation.
pub const MADP_ERR_NUMERIC: c_int = 3;
/// Null pointer or non-UTF-8 string argument.
pub const MADP_ERR_ARGUMENT: c_int = 4;
/// Unexpected internal failure.
pub const MADP_ERR_INTERNAL: c_int = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn code_of(err: &Error) -> c_int {
    match err {
        Error::Config(_) | Error::Structural(_) => MADP_ERR_CONFIG,
        Error::Data(_) | Error::Io(_) => MADP_ERR_DATA,
        Error::Numeric(_) => MADP_ERR_NUMERIC,
    }
}

fn fail(err: &Error) -> c_int {
    set_error(&err.to_string());
    code_of(err)
}

/// Run `f` behind the unwind barrier every FFI entry point needs.
fn guarded(f: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            MADP_ERR_INTERNAL
        }
    }
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn arg_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error(&format!("{name} is null"));
        return Err(MADP_ERR_ARGUMENT);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        MADP_ERR_ARGUMENT
    })
}

/// Classification metrics over `n` examples.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MadpMetrics {
    /// Balanced accuracy: mean of sensitivity and specificity.
    pub ba: f64,
    pub acc: f64,
    pub f1: f64,
    pub n: u64,
}

impl From<eval::Metrics> for MadpMetrics {
    fn from(m: eval::Metrics) -> Self {
        MadpMetrics {
            ba: m.ba,
            acc: m.acc,
            f1: m.f1,
            n: m.n as u64,
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn madp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread. Valid until the next
/// call into the library from the same thread.
#[no_mangle]
pub extern "C" fn madp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Run a full adaptation from a JSON run config (same schema as the CLI's
/// config file, including dataset paths and out_dir). On success fills
/// `out_metrics` with the target-test metrics of the selected model.
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out_metrics` must be null
/// or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn madp_run_adapt(
    config_json: *const c_char,
    out_metrics: *mut MadpMetrics,
) -> c_int {
    guarded(|| {
        let json = match unsafe { arg_str(config_json, "config_json") } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let cfg: RunConfig = match serde_json::from_str(json) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("invalid config JSON: {e}"));
                return MADP_ERR_CONFIG;
            }
        };
        match cmd_adapt(&cfg) {
            Ok(metrics) => {
                if !out_metrics.is_null() {
                    unsafe { *out_metrics = metrics.into() };
                }
                MADP_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Generate a synthetic domain-shift corpus pair from a JSON generator
/// config and write `source.jsonl` / `target.jsonl` into `out_dir`.
///
/// # Safety
/// Both pointers must be null or NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn madp_synth(config_json: *const c_char, out_dir: *const c_char) -> c_int {
    guarded(|| {
        let json = match unsafe { arg_str(config_json, "config_json") } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let dir = match unsafe { arg_str(out_dir, "out_dir") } {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let cfg: data::SynthConfig = match serde_json::from_str(json) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("invalid generator JSON: {e}"));
                return MADP_ERR_CONFIG;
            }
        };
        let run = || -> metaadapt::Result<()> {
            let (source, target) = data::synth_shift_generate(&cfg)?;
            std::fs::create_dir_all(&dir)?;
            data::write_jsonl(&source, dir.join("source.jsonl"))?;
            data::write_jsonl(&target, dir.join("target.jsonl"))?;
            Ok(())
        };
        match run() {
            Ok(()) => MADP_OK,
            Err(e) => fail(&e),
        }
    })
}

/// Verify second-order meta gradients against central finite differences on
/// `seeds` synthetic draws; writes the maximum relative error. Returns
/// `MADP_OK` even when the error exceeds the usual tolerance — the caller
/// owns the threshold.
///
/// # Safety
/// `out_max_rel_err` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn madp_gradcheck(
    seeds: u64,
    inner_steps: usize,
    out_max_rel_err: *mut f64,
) -> c_int {
    guarded(|| {
        let args = GradcheckArgs {
            seeds,
            inner_steps,
            task_batch: 4,
            hash_dim: 16,
            hidden_dim: 4,
            k: 3,
            alpha0: 1e-2,
            step: 1e-5,
            mode: GradcheckMode::SecondOrder,
        };
        match gradcheck_errors(&args) {
            Ok(errors) => {
                let max = errors.iter().cloned().fold(0.0f64, f64::max);
                if !out_max_rel_err.is_null() {
                    unsafe { *out_max_rel_err = max };
                }
                MADP_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// A loaded model: checkpointed parameters plus the featurization settings
/// needed to score raw text.
pub struct MadpModel {
    params: ParameterVector,
    spec: ModelSpec,
}

/// Load a parameter checkpoint written by `adapt`. `ngram_orders` may be
/// null for the default orders {1, 2}; it must match the orders used in
/// training. Returns null on failure (see `madp_last_error`).
///
/// # Safety
/// `checkpoint_path` must be null or NUL-terminated; `ngram_orders` must be
/// null or point to `n_orders` readable elements.
#[no_mangle]
pub unsafe extern "C" fn madp_model_load(
    checkpoint_path: *const c_char,
    ngram_orders: *const usize,
    n_orders: usize,
) -> *mut MadpModel {
    let result = catch_unwind(AssertUnwindSafe(|| {
        let path = match unsafe { arg_str(checkpoint_path, "checkpoint_path") } {
            Ok(s) => s,
            Err(_) => return std::ptr::null_mut(),
        };
        let orders = if ngram_orders.is_null() {
            vec![1, 2]
        } else {
            unsafe { std::slice::from_raw_parts(ngram_orders, n_orders) }.to_vec()
        };
        let load = || -> metaadapt::Result<MadpModel> {
            let params = checkpoint::read_params(path)?;
            let slots = ModelSlots::resolve(params.layout())?;
            let spec = ModelSpec {
                hash_dim: slots.hash_dim(),
                hidden_dim: slots.hidden_dim(),
                n_classes: slots.n_classes(),
                ngram_orders: orders,
            };
            spec.validate()?;
            Ok(MadpModel { params, spec })
        };
        match load() {
            Ok(model) => Box::into_raw(Box::new(model)),
            Err(e) => {
                fail(&e);
                std::ptr::null_mut()
            }
        }
    }));
    match result {
        Ok(ptr) => ptr,
        Err(_) => {
            set_error("internal panic");
            std::ptr::null_mut()
        }
    }
}

/// Free a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be null or a pointer returned by `madp_model_load` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn madp_model_free(model: *mut MadpModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Classify one raw text (preprocessing included). Writes the class
/// probabilities when `out_probs` (length 2) is non-null. Returns the
/// predicted label (0 or 1), or the negated error code on failure.
///
/// # Safety
/// `model` must be a live handle; `text` null or NUL-terminated;
/// `out_probs` null or valid for 2 writes.
#[no_mangle]
pub unsafe extern "C" fn madp_model_predict(
    model: *const MadpModel,
    text: *const c_char,
    out_probs: *mut f64,
) -> c_int {
    guarded(|| {
        if model.is_null() {
            set_error("model is null");
            return -MADP_ERR_ARGUMENT;
        }
        let model = unsafe { &*model };
        let text = match unsafe { arg_str(text, "text") } {
            Ok(s) => s,
            Err(code) => return -code,
        };
        let features = featurize(&data::preprocess(text), &model.spec);
        match predict(&model.params, &features) {
            Ok(pred) => {
                if !out_probs.is_null() {
                    let probs = unsafe { std::slice::from_raw_parts_mut(out_probs, 2) };
                    probs.copy_from_slice(&pred.probs[..2]);
                }
                pred.label as c_int
            }
            Err(e) => -fail(&e),
        }
    })
}

/// Evaluate a model handle on a JSONL dataset (preprocessing included).
///
/// # Safety
/// `model` must be a live handle; `dataset_path` null or NUL-terminated;
/// `out_metrics` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn madp_model_evaluate(
    model: *const MadpModel,
    dataset_path: *const c_char,
    out_metrics: *mut MadpMetrics,
) -> c_int {
    guarded(|| {
        if model.is_null() {
            set_error("model is null");
            return MADP_ERR_ARGUMENT;
        }
        let model = unsafe { &*model };
        let path = match unsafe { arg_str(dataset_path, "dataset_path") } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let run = || -> metaadapt::Result<eval::Metrics> {
            let ds = data::preprocess_dataset(&data::load_jsonl(path)?);
            eval::evaluate(&model.params, &model.spec, &ds)
        };
        match run() {
            Ok(metrics) => {
                if !out_metrics.is_null() {
                    unsafe { *out_metrics = metrics.into() };
                }
                MADP_OK
            }
            Err(e) => fail(&e),
        }
    })
}
