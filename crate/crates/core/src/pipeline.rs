//! Per-volume detection containers and the post-processing methods built
//! on the tracker: forward/backward passes, their deduplicated union, the
//! union with retained raw detections, and a neighbor-support filter.
//!
//! All methods are pure functions of (volume, config): nothing here keeps
//! state between volumes, so corpora can be processed in any order or in
//! parallel with identical results.

use crate::bytetrack::{run_forward, ConfigError, Detection, TrackerConfig};
use crate::geometry::iou;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolumeError {
    #[error("a volume needs at least one slice")]
    NoSlices,
    #[error("study id must not be empty")]
    EmptyStudyId,
    #[error("slice index {index} out of range for {count} slices")]
    SliceOutOfRange { index: usize, count: usize },
}

/// All detections of one study, bucketed by slice. The slice count is part
/// of the identity: slices with no detections are real, empty slices.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeDetections {
    study_id: String,
    slices: Vec<Vec<Detection>>,
}

impl VolumeDetections {
    pub fn new(study_id: String, slice_count: usize) -> Result<Self, VolumeError> {
        if slice_count == 0 {
            return Err(VolumeError::NoSlices);
        }
        if study_id.is_empty() {
            return Err(VolumeError::EmptyStudyId);
        }
        Ok(Self { study_id, slices: vec![Vec::new(); slice_count] })
    }

    /// Files the detection under its own slice index.
    pub fn push(&mut self, det: Detection) -> Result<(), VolumeError> {
        let count = self.slices.len();
        match self.slices.get_mut(det.slice_index) {
            Some(slot) => {
                slot.push(det);
                Ok(())
            }
            None => Err(VolumeError::SliceOutOfRange { index: det.slice_index, count }),
        }
    }

    pub fn study_id(&self) -> &str {
        &self.study_id
    }

    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }

    pub fn slice(&self, index: usize) -> &[Detection] {
        &self.slices[index]
    }

    pub fn iter_detections(&self) -> impl Iterator<Item = &Detection> {
        self.slices.iter().flatten()
    }

    pub fn detection_count(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Raw detections with score strictly above the confidence threshold.
    Baseline,
    /// One forward tracking pass.
    Bytetrack,
    /// Deduplicated union of a forward and a backward tracking pass.
    Bidirectional,
    /// Tracked output united with all raw detections above the confidence
    /// threshold, deduplicated.
    Hybrid,
    /// Keep a box only if a box on an adjacent slice overlaps it.
    Spatiotemporal,
}

impl Mode {
    /// Stable lowercase name, identical to the command-line value.
    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Bytetrack => "bytetrack",
            Mode::Bidirectional => "bidirectional",
            Mode::Hybrid => "hybrid",
            Mode::Spatiotemporal => "spatiotemporal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum HybridBase {
    Bidirectional,
    Forward,
}

/// Full method selection: which mode runs and every knob it reads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub mode: Mode,
    pub tracker: TrackerConfig,
    /// Retention threshold for baseline and hybrid, strict `>`.
    pub confidence: f64,
    /// IoU at or above which a union collapses a pair to one box.
    pub dedup_iou: f64,
    /// Which tracked output hybrid builds on.
    pub hybrid_base: HybridBase,
    /// Whether the neighbor-support filter runs on confidence-filtered
    /// rather than raw detections.
    pub filter_baseline_first: bool,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hybrid,
            tracker: TrackerConfig::default(),
            confidence: 0.20,
            dedup_iou: 0.7,
            hybrid_base: HybridBase::Bidirectional,
            filter_baseline_first: true,
        }
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.tracker.validate()?;
        for (name, value) in [("confidence", self.confidence), ("dedup_iou", self.dedup_iou)] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(ConfigError::ThresholdRange { name, value });
            }
        }
        Ok(())
    }
}

fn empty_like(volume: &VolumeDetections) -> VolumeDetections {
    VolumeDetections::new(volume.study_id().to_string(), volume.slice_count())
        .expect("source volume shape is valid")
}

/// Tracks the volume in reverse slice order and maps the result back, so
/// lesions fading out in one direction get a second chance to be picked up
/// from their strong end.
pub fn run_backward(
    volume: &VolumeDetections,
    config: &TrackerConfig,
) -> Result<VolumeDetections, ConfigError> {
    let n = volume.slice_count();
    let mut reversed = empty_like(volume);
    for s in 0..n {
        for d in volume.slice(s) {
            reversed
                .push(Detection { slice_index: n - 1 - s, ..*d })
                .expect("mirrored index is in range");
        }
    }
    let tracked = run_forward(&reversed, config)?;
    let mut out = empty_like(volume);
    for s in 0..n {
        for d in tracked.slice(s) {
            out.push(Detection { slice_index: n - 1 - s, ..*d })
                .expect("mirrored index is in range");
        }
    }
    Ok(out)
}

/// Union of two detection lists for the same slice. Candidates are taken
/// in descending score order (ties broken by coordinates, then by list
/// order, `a` first) and dropped when they overlap an already kept box at
/// `dedup_iou` or more.
pub fn merge_dedup(a: &[Detection], b: &[Detection], dedup_iou: f64) -> Vec<Detection> {
    let mut pool: Vec<Detection> = a.iter().chain(b.iter()).copied().collect();
    pool.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(x.bbox.x1().total_cmp(&y.bbox.x1()))
            .then(x.bbox.y1().total_cmp(&y.bbox.y1()))
            .then(x.bbox.x2().total_cmp(&y.bbox.x2()))
            .then(x.bbox.y2().total_cmp(&y.bbox.y2()))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for cand in pool {
        if kept.iter().all(|k| iou(&k.bbox, &cand.bbox) < dedup_iou) {
            kept.push(cand);
        }
    }
    kept
}

/// Forward and backward passes merged slice by slice. Backward track ids
/// are offset past the forward ones so ids stay unique within the study.
pub fn bidirectional(
    volume: &VolumeDetections,
    config: &MethodConfig,
) -> Result<VolumeDetections, ConfigError> {
    let fwd = run_forward(volume, &config.tracker)?;
    let bwd = run_backward(volume, &config.tracker)?;
    let id_offset =
        fwd.iter_detections().filter_map(|d| d.track_id).max().unwrap_or(0);
    let mut out = empty_like(volume);
    for s in 0..volume.slice_count() {
        let shifted: Vec<Detection> = bwd
            .slice(s)
            .iter()
            .map(|d| Detection { track_id: d.track_id.map(|id| id + id_offset), ..*d })
            .collect();
        for d in merge_dedup(fwd.slice(s), &shifted, config.dedup_iou) {
            out.push(d).expect("merged detections stay on their slice");
        }
    }
    Ok(out)
}

fn baseline(volume: &VolumeDetections, confidence: f64) -> VolumeDetections {
    let mut out = empty_like(volume);
    for d in volume.iter_detections() {
        if d.score > confidence {
            out.push(*d).expect("filtered detections stay on their slice");
        }
    }
    out
}

/// Tracked output united with every raw detection above the confidence
/// threshold, so tracker misses cannot lose a confident response.
pub fn hybrid(
    volume: &VolumeDetections,
    config: &MethodConfig,
) -> Result<VolumeDetections, ConfigError> {
    let base = match config.hybrid_base {
        HybridBase::Bidirectional => bidirectional(volume, config)?,
        HybridBase::Forward => run_forward(volume, &config.tracker)?,
    };
    let retained = baseline(volume, config.confidence);
    let mut out = empty_like(volume);
    for s in 0..volume.slice_count() {
        for d in merge_dedup(base.slice(s), retained.slice(s), config.dedup_iou) {
            out.push(d).expect("merged detections stay on their slice");
        }
    }
    Ok(out)
}

/// Keeps a box iff some box on slice z-1 or z+1 of the input overlaps it
/// (IoU strictly positive). Neighbor checks always consult the input, not
/// the partially filtered output, and the pass runs exactly once. Edge
/// slices have one neighbor; a single-slice volume keeps everything.
pub fn spatiotemporal_filter(volume: &VolumeDetections) -> VolumeDetections {
    let n = volume.slice_count();
    let mut out = empty_like(volume);
    for z in 0..n {
        for d in volume.slice(z) {
            let supported = if n == 1 {
                true
            } else {
                let before = z > 0
                    && volume.slice(z - 1).iter().any(|p| iou(&p.bbox, &d.bbox) > 0.0);
                let after = z + 1 < n
                    && volume.slice(z + 1).iter().any(|p| iou(&p.bbox, &d.bbox) > 0.0);
                before || after
            };
            if supported {
                out.push(*d).expect("kept detections stay on their slice");
            }
        }
    }
    out
}

/// Runs the configured method on one volume.
pub fn run_mode(
    volume: &VolumeDetections,
    config: &MethodConfig,
) -> Result<VolumeDetections, ConfigError> {
    config.validate()?;
    match config.mode {
        Mode::Baseline => Ok(baseline(volume, config.confidence)),
        Mode::Bytetrack => run_forward(volume, &config.tracker),
        Mode::Bidirectional => bidirectional(volume, config),
        Mode::Hybrid => hybrid(volume, config),
        Mode::Spatiotemporal => {
            let input = if config.filter_baseline_first {
                baseline(volume, config.confidence)
            } else {
                volume.clone()
            };
            Ok(spatiotemporal_filter(&input))
        }
    }
}
