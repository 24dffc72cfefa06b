//! Axis-aligned boxes in pixel coordinates and overlap measures on them.
//!
//! Boxes are corner-form `(x1, y1, x2, y2)` with `x1 < x2` and `y1 < y2`.
//! Everything downstream (association costs, deduplication, scoring) is
//! built on [`iou`], so the conventions here are load-bearing: degenerate
//! boxes cannot be constructed, and overlap of valid boxes is always a
//! finite value in `[0, 1]`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box coordinates must be finite, got ({x1}, {y1}, {x2}, {y2})")]
    NonFinite { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("box must satisfy x1 < x2 and y1 < y2, got ({x1}, {y1}, {x2}, {y2})")]
    EmptyExtent { x1: f64, y1: f64, x2: f64, y2: f64 },
}

/// Corner-form axis-aligned bounding box.
///
/// Invariants are enforced at construction: all coordinates finite,
/// `x1 < x2`, `y1 < y2`. Zero-area boxes are rejected so area and IoU
/// never divide by zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(GeometryError::NonFinite { x1, y1, x2, y2 });
        }
        if x1 >= x2 || y1 >= y2 {
            return Err(GeometryError::EmptyExtent { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    /// Always strictly positive.
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Corner coordinates as `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (self.x1, self.y1, self.x2, self.y2)
    }
}

impl std::fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Intersection over union of two boxes.
///
/// Symmetric, and exactly `1.0` for identical boxes and `0.0` for disjoint
/// ones. Boxes that merely touch along an edge count as disjoint.
///
/// ```
/// use slicetrack::geometry::{iou, BoundingBox};
///
/// let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
/// let b = BoundingBox::new(5.0, 0.0, 15.0, 10.0).unwrap();
/// assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
/// ```
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let intersection = ix * iy;
    // Union is at least max(area_a, area_b) > 0, so the division is safe.
    intersection / (a.area() + b.area() - intersection)
}

/// Pairwise IoU between two box lists, row-major `result[i][j] = iou(rows[i], cols[j])`.
pub fn iou_matrix(rows: &[BoundingBox], cols: &[BoundingBox]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| cols.iter().map(|c| iou(r, c)).collect())
        .collect()
}
