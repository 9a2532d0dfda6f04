//! C ABI over the `cie` library.
//!
//! Conventions:
//! - Every fallible function returns a [`CieStatus`]; on anything other than
//!   `CIE_STATUS_OK`, [`cie_last_error`] describes the failure.
//! - Objects are opaque handles created by `*_load` / `*_mine` and released
//!   with the matching `*_free`. Freeing a null handle is a no-op.
//! - Strings passed in are NUL-terminated UTF-8. Strings handed out are owned
//!   by the caller and must be released with [`cie_string_free`].
//! - Structured data (concept lists, explanations) crosses the boundary as
//!   JSON text.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cie::blackbox::load_predictions;
use cie::concept_space::{load_concept_instances, load_lexicon, map_text};
use cie::evaluation::fidelity;
use cie::explainer::explain;
use cie::miner::mine;
use cie::{
    ClassifierOracle, ConceptInstance, Explanation, ItemsetStore, Lexicon, Measure, MinerConfig,
    PredictionMap, RawInstance, ReferenceNb,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CieStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be read or written.
    Io = 3,
    /// Input text (JSON, JSONL, TSV) was malformed.
    Parse = 4,
    /// A parameter was out of range.
    Config = 5,
    /// Inputs were well formed but inconsistent (duplicate or missing ids,
    /// unknown classes, empty data).
    Data = 6,
    /// The library panicked; this is a bug.
    Panic = 7,
}

/// Maps surface text to concept identifiers.
pub struct CieLexicon(Lexicon);

/// Mined confident itemsets for every class.
pub struct CieStore(ItemsetStore);

/// Reference Naive Bayes classifier.
pub struct CieModel(ReferenceNb);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CieStatus, String);

type FfiResult<T> = Result<T, Failure>;

impl From<cie::Error> for Failure {
    fn from(err: cie::Error) -> Self {
        use cie::Error as E;
        let status = match &err {
            E::Io { .. } => CieStatus::Io,
            E::Parse { .. } | E::Json(_) | E::Csv(_) => CieStatus::Parse,
            E::Config(_) => CieStatus::Config,
            _ => CieStatus::Data,
        };
        Failure(status, err.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> CieStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            CieStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CieStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(CieStatus::NullPointer, format!("{name} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CieStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(CieStatus::Data, "output contains a NUL byte".into()))
}

fn parse_concepts(json: &str) -> FfiResult<Vec<String>> {
    serde_json::from_str(json).map_err(|e| {
        Failure(
            CieStatus::Parse,
            format!("concepts must be a JSON array of strings: {e}"),
        )
    })
}

fn json_text<T: serde::Serialize>(value: &T) -> FfiResult<*mut c_char> {
    let text =
        serde_json::to_string(value).map_err(|e| Failure(CieStatus::Parse, e.to_string()))?;
    into_c_string(text)
}

/// Message for the most recent failed call on this thread, or null if the
/// last call succeeded. The pointer stays valid until the next call into the
/// library on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn cie_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer previously returned by this library and not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn cie_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a three-column TSV lexicon.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cie_lexicon_load(
    path: *const c_char,
    out: *mut *mut CieLexicon,
) -> CieStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let lexicon = load_lexicon(Path::new(path))?;
        write_out(out, Box::into_raw(Box::new(CieLexicon(lexicon))), "out")
    })
}

/// # Safety
/// `lexicon` must be null or a live handle from [`cie_lexicon_load`].
#[no_mangle]
pub unsafe extern "C" fn cie_lexicon_free(lexicon: *mut CieLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Maps `text` to its concept identifiers, written to `out_json` as a sorted
/// JSON array of strings.
///
/// # Safety
/// `lexicon` must be a live handle, `text` a NUL-terminated string, and
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cie_lexicon_map(
    lexicon: *const CieLexicon,
    text: *const c_char,
    out_json: *mut *mut c_char,
) -> CieStatus {
    guard(|| {
        let lexicon = handle(lexicon, "lexicon")?;
        let text = str_arg(text, "text")?;
        let raw = RawInstance {
            id: String::new(),
            text: text.to_string(),
            label: None,
        };
        let mapped = map_text(&raw, &lexicon.0);
        write_out(out_json, json_text(&mapped.concepts)?, "out_json")
    })
}

/// Mines confident itemsets from a concept-instance JSONL file and a
/// predictions JSONL file. `measure` is 0 for rule confidence, 1 for lift.
///
/// # Safety
/// Path arguments must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cie_store_mine(
    instances_path: *const c_char,
    predictions_path: *const c_char,
    min_conf: f64,
    max_k: usize,
    measure: u32,
    min_global_count: usize,
    out: *mut *mut CieStore,
) -> CieStatus {
    guard(|| {
        let instances =
            load_concept_instances(Path::new(str_arg(instances_path, "instances_path")?))?;
        let predictions =
            load_predictions(Path::new(str_arg(predictions_path, "predictions_path")?))?;
        let measure = match measure {
            0 => Measure::RuleConfidence,
            1 => Measure::Lift,
            other => {
                return Err(Failure(
                    CieStatus::Config,
                    format!("unknown measure {other}"),
                ))
            }
        };
        let config = MinerConfig {
            min_conf,
            max_k,
            measure,
            min_global_count,
        };
        let store = mine(&instances, &predictions, &config)?;
        write_out(out, Box::into_raw(Box::new(CieStore(store))), "out")
    })
}

/// Loads a store written by [`cie_store_save`] or the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cie_store_load(path: *const c_char, out: *mut *mut CieStore) -> CieStatus {
    guard(|| {
        let store = ItemsetStore::load(Path::new(str_arg(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(CieStore(store))), "out")
    })
}

/// # Safety
/// `store` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cie_store_save(store: *const CieStore, path: *const c_char) -> CieStatus {
    guard(|| {
        let store = handle(store, "store")?;
        store.0.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Total number of itemsets across all classes; 0 for a null handle.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cie_store_len(store: *const CieStore) -> usize {
    store.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `store` must be null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cie_store_free(store: *mut CieStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Explains one instance. `concepts_json` is a JSON array of concept ids; the
/// explanation (matched itemsets, class scores, assigned label) is written to
/// `out_json` as a JSON object.
///
/// # Safety
/// `store` must be a live handle, the string arguments NUL-terminated, and
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cie_explain(
    store: *const CieStore,
    instance_id: *const c_char,
    concepts_json: *const c_char,
    out_json: *mut *mut c_char,
) -> CieStatus {
    guard(|| {
        let store = handle(store, "store")?;
        let id = str_arg(instance_id, "instance_id")?;
        let concepts = parse_concepts(str_arg(concepts_json, "concepts_json")?)?;
        let explanation: Explanation = explain(&ConceptInstance::new(id, concepts), &store.0);
        write_out(out_json, json_text(&explanation)?, "out_json")
    })
}

/// Loads a reference classifier written by the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cie_model_load(path: *const c_char, out: *mut *mut CieModel) -> CieStatus {
    guard(|| {
        let model = ReferenceNb::load(Path::new(str_arg(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(CieModel(model))), "out")
    })
}

/// Predicts the label of a concept set given as a JSON array; the label is
/// written to `out_label`.
///
/// # Safety
/// `model` must be a live handle, `concepts_json` NUL-terminated, and
/// `out_label` writable.
#[no_mangle]
pub unsafe extern "C" fn cie_model_predict(
    model: *const CieModel,
    concepts_json: *const c_char,
    out_label: *mut *mut c_char,
) -> CieStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let concepts = parse_concepts(str_arg(concepts_json, "concepts_json")?)?;
        let canonical = ConceptInstance::new("", concepts).concepts;
        write_out(
            out_label,
            into_c_string(model.0.predict(&canonical))?,
            "out_label",
        )
    })
}

/// # Safety
/// `model` must be null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cie_model_free(model: *mut CieModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fidelity between an explanations JSONL file and a predictions JSONL file
/// covering the same ids.
///
/// # Safety
/// Path arguments must be NUL-terminated strings; `out_fidelity` writable.
#[no_mangle]
pub unsafe extern "C" fn cie_fidelity_files(
    explanations_path: *const c_char,
    predictions_path: *const c_char,
    out_fidelity: *mut f64,
) -> CieStatus {
    guard(|| {
        let explanations: Vec<Explanation> =
            cie::io::read_jsonl(Path::new(str_arg(explanations_path, "explanations_path")?))?;
        let mut labels = PredictionMap::new();
        for e in explanations {
            labels.insert(e.instance_id, e.assigned_label)?;
        }
        let blackbox = load_predictions(Path::new(str_arg(predictions_path, "predictions_path")?))?;
        write_out(
            out_fidelity,
            fidelity(&labels, &blackbox)?.fidelity,
            "out_fidelity",
        )
    })
}
