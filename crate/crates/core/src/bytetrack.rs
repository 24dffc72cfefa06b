//! Two-stage association tracker that links detections across consecutive
//! slices of a volume, treating slice order as time.
//!
//! Detections are split by score into a high and a low group. Active and
//! lost tracks first compete for high detections; active tracks left over
//! then get a second chance on low detections, which lets weak responses
//! extend an established track without ever founding one. Costs are
//! `1 - IoU` between the Kalman-predicted track box and the detection box,
//! gated by `min_match`, and solved exactly per slice.
//!
//! New tracks start tentative and must be matched once more before they are
//! reported; on the very first slice of a sequence they activate (and
//! report) immediately, since no earlier slice exists to confirm against.
//! A tracker only ever reports detection boxes from the current slice.

use crate::assignment;
use crate::geometry::{iou, BoundingBox};
use crate::kalman::KalmanState;
use crate::pipeline::VolumeDetections;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} must lie in [0, 1], got {value}")]
    ThresholdRange { name: &'static str, value: f64 },
    #[error("lost_buffer must be at least 1")]
    ZeroLostBuffer,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("detection score must lie in [0, 1], got {score}")]
pub struct ScoreError {
    pub score: f64,
}

/// One scored box on one slice. `track_id` is unset on raw detector output
/// and filled in by the tracker on everything it reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
    pub slice_index: usize,
    pub track_id: Option<u64>,
}

impl Detection {
    pub fn new(bbox: BoundingBox, score: f64, slice_index: usize) -> Result<Self, ScoreError> {
        if !(0.0..=1.0).contains(&score) || score.is_nan() {
            return Err(ScoreError { score });
        }
        Ok(Self { bbox, score, slice_index, track_id: None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Active,
    Lost,
    Removed,
}

/// One tracked object. History holds the observed (not smoothed) boxes of
/// the slices this track matched, in tracking order.
#[derive(Debug, Clone)]
pub struct Track {
    id: u64,
    state: KalmanState,
    status: TrackStatus,
    score: f64,
    frames_since_update: u32,
    history: Vec<(usize, BoundingBox, f64)>,
}

impl Track {
    fn spawn(id: u64, det: &Detection, slice_index: usize, activate: bool) -> Self {
        Self {
            id,
            state: KalmanState::initiate(&det.bbox),
            status: if activate { TrackStatus::Active } else { TrackStatus::Tentative },
            score: det.score,
            frames_since_update: 0,
            history: vec![(slice_index, det.bbox, det.score)],
        }
    }

    fn absorb(&mut self, det: &Detection, slice_index: usize) {
        self.state.update(&det.bbox);
        self.status = TrackStatus::Active;
        self.score = det.score;
        self.frames_since_update = 0;
        self.history.push((slice_index, det.bbox, det.score));
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn frames_since_update(&self) -> u32 {
        self.frames_since_update
    }

    pub fn history(&self) -> &[(usize, BoundingBox, f64)] {
        &self.history
    }
}

/// Association thresholds and the lost-track retention window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Score splitting detections into the high and low groups; also the
    /// minimum score for founding a new track.
    pub track_activation: f64,
    /// Cost ceiling for association, in `1 - IoU` units.
    pub min_match: f64,
    /// How many slices a lost track survives without a match.
    pub lost_buffer: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { track_activation: 0.35, min_match: 0.95, lost_buffer: 5 }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in
            [("track_activation", self.track_activation), ("min_match", self.min_match)]
        {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(ConfigError::ThresholdRange { name, value });
            }
        }
        if self.lost_buffer == 0 {
            return Err(ConfigError::ZeroLostBuffer);
        }
        Ok(())
    }
}

/// Sequential tracker state. Feed it one slice at a time with [`Tracker::step`];
/// slice indices are assigned by call order, starting at zero.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    frame: usize,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self { config, tracks: Vec::new(), next_id: 1, frame: 0 })
    }

    /// Live tracks, for inspection. Removed tracks are dropped at the end
    /// of the step that removed them.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Cost of matching a predicted track box to a detection. Tracks whose
    /// state has degenerated to an empty box can never match.
    fn match_cost(track: &Track, det: &Detection) -> f64 {
        match track.state.bbox() {
            Some(b) => 1.0 - iou(&b, &det.bbox),
            None => 2.0,
        }
    }

    fn associate(&self, track_idx: &[usize], dets: &[&Detection]) -> assignment::Assignment {
        if track_idx.is_empty() {
            // A matrix with no rows carries no column count, so the all-
            // unmatched result is spelled out instead of solved.
            return assignment::Assignment {
                matches: Vec::new(),
                unmatched_rows: Vec::new(),
                unmatched_cols: (0..dets.len()).collect(),
            };
        }
        let cost: Vec<Vec<f64>> = track_idx
            .iter()
            .map(|&t| dets.iter().map(|d| Self::match_cost(&self.tracks[t], d)).collect())
            .collect();
        assignment::solve(&cost, self.config.min_match).expect("tracker costs are finite")
    }

    /// Processes one slice and returns the boxes reported for it, each
    /// carrying its track id, ordered by track id.
    pub fn step(&mut self, detections: &[Detection]) -> Vec<Detection> {
        self.frame += 1;
        let first_slice = self.frame == 1;
        let slice_index = self.frame - 1;

        for t in &mut self.tracks {
            t.state.predict();
        }

        let high: Vec<usize> = (0..detections.len())
            .filter(|&i| detections[i].score >= self.config.track_activation)
            .collect();
        let low: Vec<usize> = (0..detections.len())
            .filter(|&i| {
                detections[i].score > 0.0 && detections[i].score < self.config.track_activation
            })
            .collect();

        let mut reported: Vec<(u64, Detection)> = Vec::new();
        let report = |track: &Track, det: &Detection| {
            (
                track.id,
                Detection {
                    bbox: det.bbox,
                    score: det.score,
                    slice_index,
                    track_id: Some(track.id),
                },
            )
        };

        // Stage 1: active and lost tracks compete for high detections.
        let pool: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| matches!(self.tracks[i].status, TrackStatus::Active | TrackStatus::Lost))
            .collect();
        let high_dets: Vec<&Detection> = high.iter().map(|&i| &detections[i]).collect();
        let stage1 = self.associate(&pool, &high_dets);
        for &(ti, di) in &stage1.matches {
            let det = &detections[high[di]];
            self.tracks[pool[ti]].absorb(det, slice_index);
            reported.push(report(&self.tracks[pool[ti]], det));
        }

        // Stage 2: actives left over get the low detections. Lost tracks do
        // not take part, so a weak response can extend but not revive.
        let stage2_pool: Vec<usize> = stage1
            .unmatched_rows
            .iter()
            .map(|&ti| pool[ti])
            .filter(|&t| self.tracks[t].status == TrackStatus::Active)
            .collect();
        let low_dets: Vec<&Detection> = low.iter().map(|&i| &detections[i]).collect();
        let stage2 = self.associate(&stage2_pool, &low_dets);
        for &(ti, di) in &stage2.matches {
            let det = &detections[low[di]];
            self.tracks[stage2_pool[ti]].absorb(det, slice_index);
            reported.push(report(&self.tracks[stage2_pool[ti]], det));
        }

        // Stage 3: tentative tracks confirm against the remaining high
        // detections, or die. A tentative track lives exactly one step.
        let tentative: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status == TrackStatus::Tentative)
            .collect();
        let leftover_high: Vec<usize> =
            stage1.unmatched_cols.iter().map(|&di| high[di]).collect();
        let leftover_dets: Vec<&Detection> =
            leftover_high.iter().map(|&i| &detections[i]).collect();
        let stage3 = self.associate(&tentative, &leftover_dets);
        for &(ti, di) in &stage3.matches {
            let det = &detections[leftover_high[di]];
            self.tracks[tentative[ti]].absorb(det, slice_index);
            reported.push(report(&self.tracks[tentative[ti]], det));
        }
        for &ti in &stage3.unmatched_rows {
            self.tracks[tentative[ti]].status = TrackStatus::Removed;
        }

        // Unmatched actives go lost; lost tracks age out past the buffer.
        let matched: Vec<u64> = reported.iter().map(|&(id, _)| id).collect();
        for t in &mut self.tracks {
            if matches!(t.status, TrackStatus::Active | TrackStatus::Lost)
                && !matched.contains(&t.id)
            {
                t.frames_since_update += 1;
                t.status = if t.frames_since_update > self.config.lost_buffer {
                    TrackStatus::Removed
                } else {
                    TrackStatus::Lost
                };
            }
        }

        // Unclaimed high detections found new tracks.
        for &ci in &stage3.unmatched_cols {
            let det = &detections[leftover_high[ci]];
            let track = Track::spawn(self.next_id, det, slice_index, first_slice);
            self.next_id += 1;
            if first_slice {
                reported.push((
                    track.id,
                    Detection {
                        bbox: det.bbox,
                        score: det.score,
                        slice_index,
                        track_id: Some(track.id),
                    },
                ));
            }
            self.tracks.push(track);
        }

        self.tracks.retain(|t| t.status != TrackStatus::Removed);

        reported.sort_by_key(|&(id, _)| id);
        reported.into_iter().map(|(_, d)| d).collect()
    }
}

/// Runs one tracker over the volume in slice order and collects what it
/// reports. Output detections keep the study id and slice count of the
/// input and carry track ids.
pub fn run_forward(
    volume: &VolumeDetections,
    config: &TrackerConfig,
) -> Result<VolumeDetections, ConfigError> {
    let mut tracker = Tracker::new(*config)?;
    let mut out = VolumeDetections::new(volume.study_id().to_string(), volume.slice_count())
        .expect("input volume has a valid shape");
    for s in 0..volume.slice_count() {
        for det in tracker.step(volume.slice(s)) {
            out.push(det).expect("tracker reports in-range slices");
        }
    }
    Ok(out)
}
