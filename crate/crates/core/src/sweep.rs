//! Parameter exploration: a tracker grid search and a confidence
//! threshold tune, both scored against a truth corpus.
//!
//! Rows come back fully ranked and the work is parallelised per grid
//! point, so the output is the same no matter how many worker threads
//! run.

use crate::bytetrack::{ConfigError, TrackerConfig};
use crate::metrics::{evaluate_corpus, EvalError};
use crate::pipeline::{run_mode, MethodConfig, Mode, VolumeDetections};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("the parameter grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One tracker parameterisation to score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub track_activation: f64,
    pub min_match: f64,
    pub lost_buffer: u32,
}

/// A scored grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub point: GridPoint,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The stock grid: activation 0.20 to 1.00 and match floor 0.50 to 1.00,
/// both in steps of 0.05, crossed with lost buffers {3, 5, 7, 9}.
pub fn default_grid() -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for activation in (20..=100).step_by(5) {
        for min_match in (50..=100).step_by(5) {
            for lost_buffer in [3, 5, 7, 9] {
                grid.push(GridPoint {
                    track_activation: activation as f64 / 100.0,
                    min_match: min_match as f64 / 100.0,
                    lost_buffer,
                });
            }
        }
    }
    grid
}

fn score_point(
    detections: &[VolumeDetections],
    truth: &[VolumeDetections],
    base: &MethodConfig,
    point: GridPoint,
    iou_threshold: f64,
) -> Result<SweepRow, SweepError> {
    let config = MethodConfig {
        tracker: TrackerConfig {
            track_activation: point.track_activation,
            min_match: point.min_match,
            lost_buffer: point.lost_buffer,
        },
        ..*base
    };
    let predictions = detections
        .iter()
        .map(|v| run_mode(v, &config))
        .collect::<Result<Vec<_>, _>>()?;
    let eval = evaluate_corpus(&predictions, truth, iou_threshold)?;
    Ok(SweepRow {
        point,
        precision: eval.corpus.precision,
        recall: eval.corpus.recall,
        f1: eval.corpus.f1,
    })
}

fn rank(a: &SweepRow, b: &SweepRow) -> std::cmp::Ordering {
    b.f1
        .total_cmp(&a.f1)
        .then(b.recall.total_cmp(&a.recall))
        .then(a.point.track_activation.total_cmp(&b.point.track_activation))
        .then(a.point.min_match.total_cmp(&b.point.min_match))
        .then(a.point.lost_buffer.cmp(&b.point.lost_buffer))
}

/// Scores every grid point and returns the rows ranked best first:
/// F1 falling, then recall falling, then the point read lowest first.
pub fn grid_search(
    detections: &[VolumeDetections],
    truth: &[VolumeDetections],
    base: &MethodConfig,
    grid: &[GridPoint],
    iou_threshold: f64,
) -> Result<Vec<SweepRow>, SweepError> {
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    base.validate()?;
    let mut rows = grid
        .par_iter()
        .map(|&point| score_point(detections, truth, base, point, iou_threshold))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(rank);
    Ok(rows)
}

/// The confidence values the tune walks, lowest first.
pub const TUNE_THRESHOLDS: [f64; 9] = [0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80];

/// One scored confidence threshold; `best` marks the F1 argmax.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuneRow {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub best: bool,
}

/// Scores plain confidence filtering at each stock threshold. Rows stay
/// in threshold order; the lowest threshold wins F1 ties for `best`.
pub fn threshold_tune(
    detections: &[VolumeDetections],
    truth: &[VolumeDetections],
    iou_threshold: f64,
) -> Result<Vec<TuneRow>, SweepError> {
    let mut rows = TUNE_THRESHOLDS
        .par_iter()
        .map(|&confidence| {
            let config = MethodConfig {
                mode: Mode::Baseline,
                confidence,
                ..MethodConfig::default()
            };
            let predictions = detections
                .iter()
                .map(|v| run_mode(v, &config))
                .collect::<Result<Vec<_>, _>>()?;
            let eval = evaluate_corpus(&predictions, truth, iou_threshold)?;
            Ok(TuneRow {
                confidence,
                precision: eval.corpus.precision,
                recall: eval.corpus.recall,
                f1: eval.corpus.f1,
                best: false,
            })
        })
        .collect::<Result<Vec<TuneRow>, SweepError>>()?;
    let best = rows
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.f1.total_cmp(&b.f1).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .expect("threshold list is never empty");
    rows[best].best = true;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::DEFAULT_IOU_THRESHOLD;
    use crate::synth::{generate, SynthParams};

    fn corpus() -> (Vec<VolumeDetections>, Vec<VolumeDetections>) {
        let params = SynthParams {
            studies: 2,
            slices: 10,
            lesions: 2,
            seed: 23,
            ..SynthParams::default()
        };
        let studies = generate(&params).unwrap();
        let dets = studies.iter().map(|s| s.detections.clone()).collect();
        let truth = studies.iter().map(|s| s.truth.clone()).collect();
        (dets, truth)
    }

    #[test]
    fn stock_grid_has_the_full_cross_product() {
        let grid = default_grid();
        assert_eq!(grid.len(), 17 * 11 * 4);
        assert_eq!(
            grid[0],
            GridPoint { track_activation: 0.20, min_match: 0.50, lost_buffer: 3 }
        );
        let last = grid[grid.len() - 1];
        assert_eq!(last.track_activation, 1.00);
        assert_eq!(last.min_match, 1.00);
        assert_eq!(last.lost_buffer, 9);
        // Every point is distinct.
        let mut keys: Vec<String> = grid
            .iter()
            .map(|p| format!("{:.2}/{:.2}/{}", p.track_activation, p.min_match, p.lost_buffer))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), grid.len());
    }

    #[test]
    fn rows_come_back_ranked() {
        let (dets, truth) = corpus();
        let grid = [
            GridPoint { track_activation: 0.35, min_match: 0.95, lost_buffer: 5 },
            GridPoint { track_activation: 0.90, min_match: 1.00, lost_buffer: 3 },
            GridPoint { track_activation: 0.20, min_match: 0.50, lost_buffer: 9 },
        ];
        let base = MethodConfig { mode: Mode::Bytetrack, ..MethodConfig::default() };
        let rows = grid_search(&dets, &truth, &base, &grid, DEFAULT_IOU_THRESHOLD).unwrap();
        assert_eq!(rows.len(), 3);
        for w in rows.windows(2) {
            assert!(rank(&w[0], &w[1]) != std::cmp::Ordering::Greater);
        }
    }

    #[test]
    fn equal_scores_rank_by_reading_order() {
        let a = SweepRow {
            point: GridPoint { track_activation: 0.30, min_match: 0.95, lost_buffer: 5 },
            precision: 0.5,
            recall: 0.5,
            f1: 0.5,
        };
        let mut b = a;
        b.point.track_activation = 0.25;
        assert_eq!(rank(&a, &b), std::cmp::Ordering::Greater);
        b.point.track_activation = 0.30;
        b.point.lost_buffer = 7;
        assert_eq!(rank(&a, &b), std::cmp::Ordering::Less);
        b.point.lost_buffer = 5;
        b.recall = 0.6;
        assert_eq!(rank(&a, &b), std::cmp::Ordering::Greater);
    }

    #[test]
    fn singleton_grid_matches_a_direct_run() {
        let (dets, truth) = corpus();
        let point = GridPoint { track_activation: 0.35, min_match: 0.95, lost_buffer: 5 };
        let base = MethodConfig { mode: Mode::Hybrid, ..MethodConfig::default() };
        let rows = grid_search(&dets, &truth, &base, &[point], DEFAULT_IOU_THRESHOLD).unwrap();
        assert_eq!(rows.len(), 1);

        let direct: Vec<_> = dets.iter().map(|v| run_mode(v, &base).unwrap()).collect();
        let eval = evaluate_corpus(&direct, &truth, DEFAULT_IOU_THRESHOLD).unwrap();
        assert_eq!(rows[0].precision, eval.corpus.precision);
        assert_eq!(rows[0].recall, eval.corpus.recall);
        assert_eq!(rows[0].f1, eval.corpus.f1);
    }

    #[test]
    fn grid_search_is_reproducible() {
        let (dets, truth) = corpus();
        let grid: Vec<GridPoint> = default_grid().into_iter().step_by(50).collect();
        let base = MethodConfig { mode: Mode::Bytetrack, ..MethodConfig::default() };
        let a = grid_search(&dets, &truth, &base, &grid, DEFAULT_IOU_THRESHOLD).unwrap();
        let b = grid_search(&dets, &truth, &base, &grid, DEFAULT_IOU_THRESHOLD).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let (dets, truth) = corpus();
        let base = MethodConfig::default();
        assert!(matches!(
            grid_search(&dets, &truth, &base, &[], DEFAULT_IOU_THRESHOLD),
            Err(SweepError::EmptyGrid)
        ));
    }

    #[test]
    fn tune_walks_the_stock_thresholds_in_order() {
        let (dets, truth) = corpus();
        let rows = threshold_tune(&dets, &truth, DEFAULT_IOU_THRESHOLD).unwrap();
        assert_eq!(rows.len(), TUNE_THRESHOLDS.len());
        for (row, want) in rows.iter().zip(TUNE_THRESHOLDS) {
            assert_eq!(row.confidence, want);
        }
        assert_eq!(rows.iter().filter(|r| r.best).count(), 1);
        let best = rows.iter().find(|r| r.best).unwrap();
        assert!(rows.iter().all(|r| r.f1 <= best.f1));
    }

    #[test]
    fn tune_breaks_f1_ties_toward_the_lowest_threshold() {
        // A corpus with no truth lesions and no detections scores 1.0
        // everywhere, so the marker has to fall back to threshold order.
        let empty = vec![VolumeDetections::new("e".into(), 3).unwrap()];
        let rows = threshold_tune(&empty.clone(), &empty, DEFAULT_IOU_THRESHOLD).unwrap();
        assert!(rows[0].best);
        assert!(rows[1..].iter().all(|r| !r.best));
    }

    #[test]
    fn lower_confidence_never_loses_recall() {
        let (dets, truth) = corpus();
        let rows = threshold_tune(&dets, &truth, DEFAULT_IOU_THRESHOLD).unwrap();
        for w in rows.windows(2) {
            assert!(w[0].recall >= w[1].recall);
        }
    }
}
