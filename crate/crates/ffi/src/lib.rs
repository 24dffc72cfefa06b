//! C ABI for the slicetrack pipeline.
//!
//! Every function returns an `StStatus`; results travel through out
//! parameters. On any failing status the caller may read a description
//! with `st_last_error_message`. Corpora are opaque handles owned by the
//! library; strings handed out must go back through `st_string_free` and
//! corpora through `st_corpus_free`.

use slicetrack::bytetrack::TrackerConfig;
use slicetrack::io::{self, RecordKind};
use slicetrack::metrics::evaluate_corpus;
use slicetrack::pipeline::{run_mode, HybridBase, MethodConfig, Mode, VolumeDetections};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Outcome of a call. Anything but `Ok` leaves a message for
/// `st_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    EvalError = 5,
    IoError = 6,
    InternalError = 7,
}

/// How detections are linked and refiltered.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StMode {
    Baseline = 0,
    Bytetrack = 1,
    Bidirectional = 2,
    Hybrid = 3,
    Spatiotemporal = 4,
}

/// Tracked output the hybrid union builds on.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StHybridBase {
    Bidirectional = 0,
    Forward = 1,
}

/// Tracking parameters. Start from `st_track_options_default` and adjust;
/// every field must hold one of its declared values.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StTrackOptions {
    pub mode: StMode,
    /// Score at or above which a detection may start or confirm a track.
    pub track_activation: f64,
    /// IoU floor for linking a detection to a predicted track box.
    pub min_match: f64,
    /// Slices a track may go unseen before it is dropped.
    pub lost_buffer: u32,
    /// Score a detection must exceed to be kept outside tracking.
    pub confidence: f64,
    /// IoU at or above which a merged pair collapses to one box.
    pub dedup_iou: f64,
    pub hybrid_base: StHybridBase,
    /// Run the confidence filter before the neighbor-support filter.
    pub filter_baseline_first: bool,
}

/// Corpus-level counts and rates from `st_evaluate`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StEvalReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// An owned set of volumes, opaque to the caller.
pub struct StCorpus {
    volumes: Vec<VolumeDetections>,
    kind: RecordKind,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: StStatus, err: impl std::fmt::Display) -> StStatus {
    let text = err.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("NUL bytes were replaced");
    });
    status
}

fn guard(f: impl FnOnce() -> StStatus) -> StStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(StStatus::InternalError, "internal invariant failed"),
    }
}

/// Message of the most recent failing call on this thread. The pointer
/// stays valid until the next failing call on the same thread; it is
/// never null and holds an empty string before any failure.
#[no_mangle]
pub extern "C" fn st_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn st_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// The stock tracking configuration.
#[no_mangle]
pub extern "C" fn st_track_options_default() -> StTrackOptions {
    StTrackOptions {
        mode: StMode::Hybrid,
        track_activation: 0.35,
        min_match: 0.95,
        lost_buffer: 5,
        confidence: 0.20,
        dedup_iou: 0.7,
        hybrid_base: StHybridBase::Bidirectional,
        filter_baseline_first: true,
    }
}

fn method_config(options: &StTrackOptions) -> MethodConfig {
    MethodConfig {
        mode: match options.mode {
            StMode::Baseline => Mode::Baseline,
            StMode::Bytetrack => Mode::Bytetrack,
            StMode::Bidirectional => Mode::Bidirectional,
            StMode::Hybrid => Mode::Hybrid,
            StMode::Spatiotemporal => Mode::Spatiotemporal,
        },
        tracker: TrackerConfig {
            track_activation: options.track_activation,
            min_match: options.min_match,
            lost_buffer: options.lost_buffer,
        },
        confidence: options.confidence,
        dedup_iou: options.dedup_iou,
        hybrid_base: match options.hybrid_base {
            StHybridBase::Bidirectional => HybridBase::Bidirectional,
            StHybridBase::Forward => HybridBase::Forward,
        },
        filter_baseline_first: options.filter_baseline_first,
    }
}

fn kind_for(with_scores: bool) -> RecordKind {
    if with_scores {
        RecordKind::WithScores
    } else {
        RecordKind::BoxesOnly
    }
}

fn hand_out(corpus: StCorpus, out: *mut *mut StCorpus) -> StStatus {
    // Caller pointers were checked before doing any work.
    unsafe { *out = Box::into_raw(Box::new(corpus)) };
    StStatus::Ok
}

/// Parses record text into a new corpus. `with_scores` selects between
/// detection records (scored boxes) and plain truth records.
///
/// # Safety
/// `text` must point to a NUL-terminated string and `out` to writable
/// space for one pointer. On `Ok`, `*out` owns a corpus the caller must
/// release with `st_corpus_free`.
#[no_mangle]
pub unsafe extern "C" fn st_corpus_parse_text(
    text: *const c_char,
    with_scores: bool,
    out: *mut *mut StCorpus,
) -> StStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "text and out must be non-null");
        }
        let text = match unsafe { CStr::from_ptr(text) }.to_str() {
            Ok(t) => t,
            Err(e) => return fail(StStatus::InvalidUtf8, e),
        };
        let kind = kind_for(with_scores);
        match io::parse_text(text, kind) {
            Ok(volumes) => hand_out(StCorpus { volumes, kind }, out),
            Err(e) => fail(StStatus::ParseError, e),
        }
    })
}

/// Reads and parses one record file into a new corpus.
///
/// # Safety
/// `path` must point to a NUL-terminated string and `out` to writable
/// space for one pointer. On `Ok`, `*out` owns a corpus the caller must
/// release with `st_corpus_free`.
#[no_mangle]
pub unsafe extern "C" fn st_corpus_parse_file(
    path: *const c_char,
    with_scores: bool,
    out: *mut *mut StCorpus,
) -> StStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "path and out must be non-null");
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(p) => p,
            Err(e) => return fail(StStatus::InvalidUtf8, e),
        };
        let kind = kind_for(with_scores);
        match io::read_file(Path::new(path), kind) {
            Ok(volumes) => hand_out(StCorpus { volumes, kind }, out),
            Err(e @ io::FileError::Io { .. }) => fail(StStatus::IoError, e),
            Err(e @ io::FileError::Parse { .. }) => fail(StStatus::ParseError, e),
        }
    })
}

/// Runs the configured mode over every volume of `input`, producing a new
/// detection corpus.
///
/// # Safety
/// `input`, `options`, and `out` must be non-null; `input` must be a live
/// corpus handle and `options` a fully initialised struct whose enum
/// fields hold declared values. On `Ok`, `*out` owns a corpus the caller
/// must release with `st_corpus_free`.
#[no_mangle]
pub unsafe extern "C" fn st_track(
    input: *const StCorpus,
    options: *const StTrackOptions,
    out: *mut *mut StCorpus,
) -> StStatus {
    guard(|| {
        if input.is_null() || options.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "input, options, and out must be non-null");
        }
        let input = unsafe { &*input };
        let config = method_config(unsafe { &*options });
        if let Err(e) = config.validate() {
            return fail(StStatus::InvalidArgument, e);
        }
        let mut volumes = Vec::with_capacity(input.volumes.len());
        for v in &input.volumes {
            match run_mode(v, &config) {
                Ok(out_volume) => volumes.push(out_volume),
                Err(e) => return fail(StStatus::InvalidArgument, e),
            }
        }
        hand_out(StCorpus { volumes, kind: RecordKind::WithScores }, out)
    })
}

/// Renders a corpus in the canonical record text form.
///
/// # Safety
/// `corpus` must be a live corpus handle and `out` writable space for one
/// pointer. On `Ok`, `*out` is a NUL-terminated string the caller must
/// release with `st_string_free`.
#[no_mangle]
pub unsafe extern "C" fn st_corpus_serialize(
    corpus: *const StCorpus,
    out: *mut *mut c_char,
) -> StStatus {
    guard(|| {
        if corpus.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "corpus and out must be non-null");
        }
        let corpus = unsafe { &*corpus };
        let text = io::serialize(&corpus.volumes, corpus.kind, None);
        match CString::new(text) {
            Ok(c) => {
                unsafe { *out = c.into_raw() };
                StStatus::Ok
            }
            Err(e) => fail(StStatus::InternalError, e),
        }
    })
}

/// Scores `predictions` against `truth` and fills `report` with the
/// corpus-level counts and rates.
///
/// # Safety
/// All three pointers must be non-null; the corpora must be live handles
/// and `report` writable space for one `StEvalReport`.
#[no_mangle]
pub unsafe extern "C" fn st_evaluate(
    predictions: *const StCorpus,
    truth: *const StCorpus,
    report: *mut StEvalReport,
) -> StStatus {
    guard(|| {
        if predictions.is_null() || truth.is_null() || report.is_null() {
            return fail(StStatus::NullPointer, "predictions, truth, and report must be non-null");
        }
        let predictions = unsafe { &*predictions };
        let truth = unsafe { &*truth };
        match evaluate_corpus(
            &predictions.volumes,
            &truth.volumes,
            slicetrack::metrics::DEFAULT_IOU_THRESHOLD,
        ) {
            Ok(eval) => {
                let c = eval.corpus;
                unsafe {
                    *report = StEvalReport {
                        true_positives: c.true_positives,
                        false_positives: c.false_positives,
                        false_negatives: c.false_negatives,
                        precision: c.precision,
                        recall: c.recall,
                        f1: c.f1,
                    };
                }
                StStatus::Ok
            }
            Err(e) => fail(StStatus::EvalError, e),
        }
    })
}

/// Number of studies in the corpus.
///
/// # Safety
/// `corpus` must be a live corpus handle and `out` writable space for one
/// `size_t`.
#[no_mangle]
pub unsafe extern "C" fn st_corpus_study_count(
    corpus: *const StCorpus,
    out: *mut usize,
) -> StStatus {
    guard(|| {
        if corpus.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "corpus and out must be non-null");
        }
        unsafe { *out = (*corpus).volumes.len() };
        StStatus::Ok
    })
}

/// Total number of boxes across all studies in the corpus.
///
/// # Safety
/// `corpus` must be a live corpus handle and `out` writable space for one
/// `size_t`.
#[no_mangle]
pub unsafe extern "C" fn st_corpus_detection_count(
    corpus: *const StCorpus,
    out: *mut usize,
) -> StStatus {
    guard(|| {
        if corpus.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "corpus and out must be non-null");
        }
        let total = unsafe { &*corpus }.volumes.iter().map(|v| v.detection_count()).sum();
        unsafe { *out = total };
        StStatus::Ok
    })
}

/// Releases a corpus handle. A null pointer is a no-op.
///
/// # Safety
/// `corpus` must be null or a pointer obtained from this library that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn st_corpus_free(corpus: *mut StCorpus) {
    if !corpus.is_null() {
        drop(unsafe { Box::from_raw(corpus) });
    }
}

/// Releases a string obtained from this library. A null pointer is a
/// no-op.
///
/// # Safety
/// `text` must be null or a pointer obtained from this library that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn st_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}
