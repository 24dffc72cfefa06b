//! Slice-level detection scoring: greedy matching against ground truth and
//! precision/recall/F1 over studies and corpora.
//!
//! Counts are integers all the way up; rates are derived once, at the
//! scope where they are reported. Corpus rates therefore weight every
//! detection equally rather than every study equally.

use crate::bytetrack::Detection;
use crate::geometry::{iou, BoundingBox};
use crate::pipeline::VolumeDetections;
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

/// A predicted box must overlap a truth box strictly beyond this to count.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("study id mismatch: predictions for '{pred}', truth for '{truth}'")]
    StudyIdMismatch { pred: String, truth: String },
    #[error("slice count mismatch for '{study}': predictions say {pred}, truth says {truth}")]
    SliceCountMismatch { study: String, pred: usize, truth: usize },
    #[error("predictions reference study '{study}' which is not in the truth set")]
    UnknownStudy { study: String },
    #[error("study '{study}' appears more than once")]
    DuplicateStudy { study: String },
}

/// Counts and rates for one scope (a study id, or "corpus").
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub scope: String,
    #[serde(rename = "tp")]
    pub true_positives: u64,
    #[serde(rename = "fp")]
    pub false_positives: u64,
    #[serde(rename = "fn")]
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    /// Derives the rates from raw counts. A scope with no predictions and
    /// no truth is scored perfect; otherwise empty denominators score zero.
    pub fn from_counts(scope: String, tp: u64, fp: u64, fn_: u64) -> Self {
        let (precision, recall, f1) = if tp + fp + fn_ == 0 {
            (1.0, 1.0, 1.0)
        } else {
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            (p, r, f1_score(p, r))
        };
        Self {
            scope,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Matches one slice of predictions against its truth boxes, returning
/// `(tp, fp, fn)`.
///
/// Predictions are visited in descending score order (ties by input
/// position) and claim the unmatched truth of highest IoU, lowest index on
/// ties. The claim counts as a true positive only when that IoU is
/// strictly above `iou_threshold`; otherwise the prediction is a false
/// positive and the truth stays claimable.
pub fn match_slice(
    preds: &[Detection],
    truths: &[BoundingBox],
    iou_threshold: f64,
) -> (u64, u64, u64) {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));

    let mut claimed = vec![false; truths.len()];
    let mut tp = 0;
    let mut fp = 0;
    for &pi in &order {
        let mut best: Option<(usize, f64)> = None;
        for (ti, t) in truths.iter().enumerate() {
            if claimed[ti] {
                continue;
            }
            let v = iou(&preds[pi].bbox, t);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((ti, v));
            }
        }
        match best {
            Some((ti, v)) if v > iou_threshold => {
                claimed[ti] = true;
                tp += 1;
            }
            _ => fp += 1,
        }
    }
    let fn_ = claimed.iter().filter(|&&c| !c).count() as u64;
    (tp, fp, fn_)
}

fn study_counts(
    pred: &VolumeDetections,
    truth: &VolumeDetections,
    iou_threshold: f64,
) -> Result<(u64, u64, u64), EvalError> {
    if pred.study_id() != truth.study_id() {
        return Err(EvalError::StudyIdMismatch {
            pred: pred.study_id().to_string(),
            truth: truth.study_id().to_string(),
        });
    }
    if pred.slice_count() != truth.slice_count() {
        return Err(EvalError::SliceCountMismatch {
            study: pred.study_id().to_string(),
            pred: pred.slice_count(),
            truth: truth.slice_count(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for s in 0..truth.slice_count() {
        let boxes: Vec<BoundingBox> = truth.slice(s).iter().map(|d| d.bbox).collect();
        let (t, f, n) = match_slice(pred.slice(s), &boxes, iou_threshold);
        tp += t;
        fp += f;
        fn_ += n;
    }
    Ok((tp, fp, fn_))
}

/// Scores one study. Study ids and slice counts must agree.
pub fn evaluate_study(
    pred: &VolumeDetections,
    truth: &VolumeDetections,
    iou_threshold: f64,
) -> Result<EvalReport, EvalError> {
    let (tp, fp, fn_) = study_counts(pred, truth, iou_threshold)?;
    Ok(EvalReport::from_counts(truth.study_id().to_string(), tp, fp, fn_))
}

/// Per-study reports plus the corpus roll-up over summed counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusEval {
    pub studies: Vec<EvalReport>,
    pub corpus: EvalReport,
}

/// Scores a corpus. The truth set defines the studies and their order;
/// a study with no predictions scores as all misses, but predictions for
/// a study the truth set does not know are an input error.
pub fn evaluate_corpus(
    preds: &[VolumeDetections],
    truths: &[VolumeDetections],
    iou_threshold: f64,
) -> Result<CorpusEval, EvalError> {
    let mut by_id: HashMap<&str, &VolumeDetections> = HashMap::new();
    for p in preds {
        if by_id.insert(p.study_id(), p).is_some() {
            return Err(EvalError::DuplicateStudy { study: p.study_id().to_string() });
        }
    }
    let mut truth_ids: Vec<&str> = Vec::new();
    for t in truths {
        if truth_ids.contains(&t.study_id()) {
            return Err(EvalError::DuplicateStudy { study: t.study_id().to_string() });
        }
        truth_ids.push(t.study_id());
    }
    for p in preds {
        if !truth_ids.contains(&p.study_id()) {
            return Err(EvalError::UnknownStudy { study: p.study_id().to_string() });
        }
    }

    let empty_for = |t: &VolumeDetections| {
        VolumeDetections::new(t.study_id().to_string(), t.slice_count())
            .expect("truth volume shape is valid")
    };

    let mut studies = Vec::with_capacity(truths.len());
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for t in truths {
        let counts = match by_id.get(t.study_id()) {
            Some(p) => study_counts(p, t, iou_threshold)?,
            None => study_counts(&empty_for(t), t, iou_threshold)?,
        };
        tp += counts.0;
        fp += counts.1;
        fn_ += counts.2;
        studies.push(EvalReport::from_counts(t.study_id().to_string(), counts.0, counts.1, counts.2));
    }
    let corpus = EvalReport::from_counts("corpus".to_string(), tp, fp, fn_);
    Ok(CorpusEval { studies, corpus })
}
