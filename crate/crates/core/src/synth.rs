//! Seeded generator for synthetic volumes: lesions that persist across
//! slices, jittered detections of them, and spatially isolated clutter.
//!
//! Placement is rejection-sampled against invariants the rest of the
//! pipeline leans on:
//! * consecutive truth boxes of a lesion overlap, and so do consecutive
//!   observations of it, so every lesion survives adjacency filtering;
//! * distinct lesions keep a clear gap on neighbouring slices, so
//!   associations cannot jump between them;
//! * clutter keeps the same gap from every other box on its own and the
//!   adjacent slices, so it never has cross-slice support.
//!
//! All emitted coordinates and scores are rounded to six decimals, the
//! precision the record files carry.

use crate::bytetrack::Detection;
use crate::geometry::{iou, BoundingBox};
use crate::pipeline::VolumeDetections;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const BASE_EXTENT: (f64, f64) = (16.0, 32.0);
const MAX_SPAN: usize = 9;
const CENTER_MARGIN: f64 = 64.0;
const ISOLATION_GAP: f64 = 12.0;
const CLUTTER_EXTENT: (f64, f64) = (10.0, 24.0);
const CLUTTER_MARGIN: f64 = 24.0;
const CLUTTER_SCORE: (f64, f64) = (0.05, 0.9);
const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("could not place lesion {lesion} of '{study}' clear of the others after {attempts} attempts")]
    LesionPlacement { study: String, lesion: usize, attempts: usize },
    #[error("could not jitter observations of lesion {lesion} in '{study}' into an overlapping chain after {attempts} attempts")]
    ObservationJitter { study: String, lesion: usize, attempts: usize },
    #[error("could not place clutter on slice {slice} of '{study}' after {attempts} attempts")]
    ClutterPlacement { study: String, slice: usize, attempts: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub studies: usize,
    pub slices: usize,
    pub lesions: usize,
    pub image_size: f64,
    /// Per-slice probability of one clutter detection.
    pub clutter_rate: f64,
    /// Probability that a truth box goes unobserved.
    pub dropout: f64,
    /// Half-width of the uniform noise added to each observed coordinate.
    pub jitter: f64,
    /// Largest per-slice lesion displacement along either axis.
    pub drift_cap: f64,
    /// Lowest score an observation of a real lesion can get.
    pub score_floor: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            studies: 8,
            slices: 24,
            lesions: 3,
            image_size: 512.0,
            clutter_rate: 0.2,
            dropout: 0.1,
            jitter: 1.0,
            drift_cap: 2.0,
            score_floor: 0.195,
            seed: 7,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::InvalidParams(msg.to_string()));
        if self.studies == 0 {
            return bad("studies must be at least 1");
        }
        if self.slices < 2 {
            return bad("slices must be at least 2");
        }
        if !(self.image_size.is_finite() && self.image_size >= 192.0) {
            return bad("image size must be at least 192");
        }
        if !(0.0..=1.0).contains(&self.clutter_rate) {
            return bad("clutter rate must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1]");
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad("jitter must be nonnegative");
        }
        if !(self.drift_cap.is_finite() && self.drift_cap >= 0.0) {
            return bad("drift cap must be nonnegative");
        }
        if !(self.score_floor > 0.0 && self.score_floor < 1.0) {
            return bad("score floor must lie strictly between 0 and 1");
        }
        Ok(())
    }
}

/// One generated study: what is really there, what the detector saw, and
/// the clutter subset of the latter.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthStudy {
    pub truth: VolumeDetections,
    pub detections: VolumeDetections,
    pub clutter: VolumeDetections,
}

/// Rounds to the six-decimal grid the record files can represent exactly.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn inflate(b: &BoundingBox, pad: f64) -> BoundingBox {
    BoundingBox::new(b.x1() - pad, b.y1() - pad, b.x2() + pad, b.y2() + pad)
        .expect("padding grows the box")
}

fn clear_of<'a>(
    candidate: &BoundingBox,
    others: impl IntoIterator<Item = &'a BoundingBox>,
) -> bool {
    let padded = inflate(candidate, ISOLATION_GAP);
    others.into_iter().all(|o| iou(&padded, o) == 0.0)
}

/// Generates `params.studies` studies. Each study draws from its own
/// stream seeded off the master seed, so study `i` is the same no matter
/// how many follow it.
pub fn generate(params: &SynthParams) -> Result<Vec<SynthStudy>, SynthError> {
    params.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    (0..params.studies)
        .map(|i| {
            let study_seed: u64 = master.gen();
            generate_study(params, format!("synth-{i:04}"), study_seed)
        })
        .collect()
}

fn place_lesion(
    params: &SynthParams,
    truth_by_slice: &[Vec<BoundingBox>],
    rng: &mut ChaCha8Rng,
) -> Option<Vec<(usize, BoundingBox)>> {
    let n = truth_by_slice.len();
    let max_span = MAX_SPAN.min(n);
    'attempt: for _ in 0..PLACEMENT_ATTEMPTS {
        let span = rng.gen_range(2..=max_span);
        let z0 = rng.gen_range(0..=n - span);
        let base_w = rng.gen_range(BASE_EXTENT.0..BASE_EXTENT.1);
        let base_h = rng.gen_range(BASE_EXTENT.0..BASE_EXTENT.1);
        let cx0 = rng.gen_range(CENTER_MARGIN..params.image_size - CENTER_MARGIN);
        let cy0 = rng.gen_range(CENTER_MARGIN..params.image_size - CENTER_MARGIN);
        let dx = rng.gen_range(-params.drift_cap..=params.drift_cap);
        let dy = rng.gen_range(-params.drift_cap..=params.drift_cap);

        let mut boxes: Vec<(usize, BoundingBox)> = Vec::with_capacity(span);
        for k in 0..span {
            // Cross-section of an ellipsoid sampled across its span.
            let t = (k as f64 - (span as f64 - 1.0) / 2.0) / ((span as f64 + 1.0) / 2.0);
            let f = (1.0 - t * t).sqrt();
            let (hw, hh) = (base_w * f / 2.0, base_h * f / 2.0);
            let cx = cx0 + dx * k as f64;
            let cy = cy0 + dy * k as f64;
            let b = BoundingBox::new(
                round6(cx - hw),
                round6(cy - hh),
                round6(cx + hw),
                round6(cy + hh),
            )
            .expect("lesion extent stays positive");
            boxes.push((z0 + k, b));
        }
        for w in boxes.windows(2) {
            if iou(&w[0].1, &w[1].1) == 0.0 {
                continue 'attempt;
            }
        }
        for &(z, ref b) in &boxes {
            for nz in z.saturating_sub(1)..=(z + 1).min(n - 1) {
                if !clear_of(b, &truth_by_slice[nz]) {
                    continue 'attempt;
                }
            }
        }
        return Some(boxes);
    }
    None
}

fn observe_lesion(
    params: &SynthParams,
    lesion: &[(usize, BoundingBox)],
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Detection>> {
    'attempt: for _ in 0..PLACEMENT_ATTEMPTS {
        let mut slots: Vec<Option<Detection>> = Vec::with_capacity(lesion.len());
        for &(z, ref truth) in lesion {
            if rng.gen_bool(params.dropout) {
                slots.push(None);
                continue;
            }
            let j = params.jitter;
            let bbox = BoundingBox::new(
                round6(truth.x1() + rng.gen_range(-j..=j)),
                round6(truth.y1() + rng.gen_range(-j..=j)),
                round6(truth.x2() + rng.gen_range(-j..=j)),
                round6(truth.y2() + rng.gen_range(-j..=j)),
            )
            .ok();
            let bbox = match bbox {
                Some(b) if iou(&b, truth) > 0.5 => b,
                // Jitter broke the observation away from its lesion.
                _ => continue 'attempt,
            };
            let score = round6(rng.gen_range(params.score_floor..=1.0));
            slots.push(Some(Detection::new(bbox, score, z).expect("score stays in range")));
        }
        for w in slots.windows(2) {
            if let (Some(a), Some(b)) = (&w[0], &w[1]) {
                if iou(&a.bbox, &b.bbox) == 0.0 {
                    continue 'attempt;
                }
            }
        }
        return Some(slots.into_iter().flatten().collect());
    }
    None
}

fn place_clutter(
    params: &SynthParams,
    z: usize,
    truth_by_slice: &[Vec<BoundingBox>],
    det_by_slice: &[Vec<Detection>],
    clutter_by_slice: &[Vec<Detection>],
    rng: &mut ChaCha8Rng,
) -> Option<Detection> {
    let n = truth_by_slice.len();
    for _ in 0..PLACEMENT_ATTEMPTS {
        let hw = rng.gen_range(CLUTTER_EXTENT.0..CLUTTER_EXTENT.1) / 2.0;
        let hh = rng.gen_range(CLUTTER_EXTENT.0..CLUTTER_EXTENT.1) / 2.0;
        let cx = rng.gen_range(CLUTTER_MARGIN..params.image_size - CLUTTER_MARGIN);
        let cy = rng.gen_range(CLUTTER_MARGIN..params.image_size - CLUTTER_MARGIN);
        let b = BoundingBox::new(
            round6(cx - hw),
            round6(cy - hh),
            round6(cx + hw),
            round6(cy + hh),
        )
        .expect("clutter extent stays positive");

        let lo = z.saturating_sub(1);
        let hi = (z + 1).min(n - 1);
        let clear = (lo..=hi).all(|nz| {
            clear_of(&b, &truth_by_slice[nz])
                && clear_of(&b, det_by_slice[nz].iter().map(|d| &d.bbox))
                && clear_of(&b, clutter_by_slice[nz].iter().map(|d| &d.bbox))
        });
        if clear {
            let score = round6(rng.gen_range(CLUTTER_SCORE.0..CLUTTER_SCORE.1));
            return Some(Detection::new(b, score, z).expect("score stays in range"));
        }
    }
    None
}

fn generate_study(
    params: &SynthParams,
    id: String,
    seed: u64,
) -> Result<SynthStudy, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.slices;
    let mut truth_by_slice: Vec<Vec<BoundingBox>> = vec![Vec::new(); n];
    let mut det_by_slice: Vec<Vec<Detection>> = vec![Vec::new(); n];

    for li in 0..params.lesions {
        let lesion = place_lesion(params, &truth_by_slice, &mut rng).ok_or_else(|| {
            SynthError::LesionPlacement {
                study: id.clone(),
                lesion: li,
                attempts: PLACEMENT_ATTEMPTS,
            }
        })?;
        let observations = observe_lesion(params, &lesion, &mut rng).ok_or_else(|| {
            SynthError::ObservationJitter {
                study: id.clone(),
                lesion: li,
                attempts: PLACEMENT_ATTEMPTS,
            }
        })?;
        for (z, b) in lesion {
            truth_by_slice[z].push(b);
        }
        for d in observations {
            det_by_slice[d.slice_index].push(d);
        }
    }

    let mut clutter_by_slice: Vec<Vec<Detection>> = vec![Vec::new(); n];
    for z in 0..n {
        if params.clutter_rate > 0.0 && rng.gen_bool(params.clutter_rate) {
            let d = place_clutter(
                params,
                z,
                &truth_by_slice,
                &det_by_slice,
                &clutter_by_slice,
                &mut rng,
            )
            .ok_or_else(|| SynthError::ClutterPlacement {
                study: id.clone(),
                slice: z,
                attempts: PLACEMENT_ATTEMPTS,
            })?;
            clutter_by_slice[z].push(d);
        }
    }

    let mut truth = VolumeDetections::new(id.clone(), n).expect("validated shape");
    let mut detections = VolumeDetections::new(id.clone(), n).expect("validated shape");
    let mut clutter = VolumeDetections::new(id, n).expect("validated shape");
    for z in 0..n {
        for b in &truth_by_slice[z] {
            truth
                .push(Detection::new(*b, 1.0, z).expect("unit score"))
                .expect("slice in range");
        }
        for d in &det_by_slice[z] {
            detections.push(*d).expect("slice in range");
        }
        for d in &clutter_by_slice[z] {
            detections.push(*d).expect("slice in range");
            clutter.push(*d).expect("slice in range");
        }
    }
    Ok(SynthStudy { truth, detections, clutter })
}
