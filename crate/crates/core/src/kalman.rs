//! Constant-velocity Kalman filter over box center, aspect ratio, and height.
//!
//! The state is 8-dimensional: `(cx, cy, a, h)` plus one velocity per
//! component, where `a = width / height`. Only the first four components
//! are observed. Process and measurement noise scale with the current box
//! height through two fixed weights, so uncertainty tracks object size.
//! Corner-form boxes are converted at this module's boundary; nothing
//! outside it sees center form.

use crate::geometry::BoundingBox;
use nalgebra::{SMatrix, SVector};

type Vec4 = SVector<f64, 4>;
type Vec8 = SVector<f64, 8>;
type Mat8 = SMatrix<f64, 8, 8>;
type Mat4x8 = SMatrix<f64, 4, 8>;

/// Position noise scale, in units of box height per slice.
pub const STD_WEIGHT_POSITION: f64 = 1.0 / 20.0;
/// Velocity noise scale, in units of box height per slice.
pub const STD_WEIGHT_VELOCITY: f64 = 1.0 / 160.0;

fn motion_matrix() -> Mat8 {
    let mut f = Mat8::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation_matrix() -> Mat4x8 {
    let mut h = Mat4x8::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn measurement(bbox: &BoundingBox) -> Vec4 {
    let w = bbox.width();
    let h = bbox.height();
    Vec4::new(bbox.x1() + w / 2.0, bbox.y1() + h / 2.0, w / h, h)
}

/// Filter state for one tracked box.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    mean: Vec8,
    covariance: Mat8,
}

impl KalmanState {
    /// Starts a track from an unassociated box: measured components take
    /// the box values, velocities start at zero with wide uncertainty.
    pub fn initiate(bbox: &BoundingBox) -> Self {
        let z = measurement(bbox);
        let mut mean = Vec8::zeros();
        for i in 0..4 {
            mean[i] = z[i];
        }
        let h = z[3];
        let std = [
            2.0 * STD_WEIGHT_POSITION * h,
            2.0 * STD_WEIGHT_POSITION * h,
            1e-2,
            2.0 * STD_WEIGHT_POSITION * h,
            10.0 * STD_WEIGHT_VELOCITY * h,
            10.0 * STD_WEIGHT_VELOCITY * h,
            1e-5,
            10.0 * STD_WEIGHT_VELOCITY * h,
        ];
        let mut covariance = Mat8::zeros();
        for i in 0..8 {
            covariance[(i, i)] = std[i] * std[i];
        }
        Self { mean, covariance }
    }

    /// Advances the state one slice: position moves by velocity, and
    /// height-scaled process noise widens the covariance.
    pub fn predict(&mut self) {
        let h = self.mean[3];
        let std = [
            STD_WEIGHT_POSITION * h,
            STD_WEIGHT_POSITION * h,
            1e-2,
            STD_WEIGHT_POSITION * h,
            STD_WEIGHT_VELOCITY * h,
            STD_WEIGHT_VELOCITY * h,
            1e-5,
            STD_WEIGHT_VELOCITY * h,
        ];
        let mut q = Mat8::zeros();
        for i in 0..8 {
            q[(i, i)] = std[i] * std[i];
        }
        let f = motion_matrix();
        self.mean = f * self.mean;
        self.covariance = f * self.covariance * f.transpose() + q;
    }

    /// Folds a measured box into the state. The innovation is solved
    /// through a Cholesky factorization of the projected covariance.
    pub fn update(&mut self, bbox: &BoundingBox) {
        let h_obs = observation_matrix();
        let h = self.mean[3];
        let std = [
            STD_WEIGHT_POSITION * h,
            STD_WEIGHT_POSITION * h,
            1e-1,
            STD_WEIGHT_POSITION * h,
        ];
        let mut s = h_obs * self.covariance * h_obs.transpose();
        for i in 0..4 {
            s[(i, i)] += std[i] * std[i];
        }
        let projected_mean = h_obs * self.mean;

        let pht = self.covariance * h_obs.transpose();
        let chol = s.cholesky().expect("projected covariance is positive definite");
        let gain = chol.solve(&pht.transpose()).transpose();

        let innovation = measurement(bbox) - projected_mean;
        self.mean += gain * innovation;
        self.covariance -= gain * s * gain.transpose();
    }

    /// Corner-form box for the current state, or `None` when the state
    /// has drifted to a non-positive width or height.
    pub fn bbox(&self) -> Option<BoundingBox> {
        let (cx, cy, a, h) = (self.mean[0], self.mean[1], self.mean[2], self.mean[3]);
        let w = a * h;
        if !(w > 0.0 && h > 0.0) {
            return None;
        }
        BoundingBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0).ok()
    }

    pub fn mean(&self) -> [f64; 8] {
        self.mean.into()
    }

    pub fn covariance_trace(&self) -> f64 {
        self.covariance.trace()
    }

    /// Trace of the 4x4 block covering the observed components.
    pub fn observed_trace(&self) -> f64 {
        (0..4).map(|i| self.covariance[(i, i)]).sum()
    }

    /// Largest absolute asymmetry in the covariance, which exact
    /// arithmetic would keep at zero.
    pub fn covariance_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                worst = worst.max((self.covariance[(i, j)] - self.covariance[(j, i)]).abs());
            }
        }
        worst
    }

    /// Whether the covariance admits a Cholesky factorization.
    pub fn covariance_is_positive_definite(&self) -> bool {
        self.covariance.cholesky().is_some()
    }
}
