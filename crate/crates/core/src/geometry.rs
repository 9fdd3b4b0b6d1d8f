//! Axis-aligned boxes in normalized image coordinates.
//!
//! Coordinates are kept in `(x_min, x_max, y_min, y_max)` order, the same
//! order as the CSV columns.

use crate::error::{Error, Result};
use crate::math;

/// Axis-aligned box with `0 <= min <= max <= 1` on both axes.
///
/// Zero-width or zero-height boxes are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let ok = 0.0 <= x_min && x_min <= x_max && x_max <= 1.0 && 0.0 <= y_min && y_min <= y_max && y_max <= 1.0;
        if ok {
            Ok(Self { x_min, x_max, y_min, y_max })
        } else {
            Err(Error::InvalidBox { x_min, x_max, y_min, y_max })
        }
    }

    /// Builds a box by clamping each coordinate into `[0, 1]` and ordering
    /// the endpoints on each axis.
    pub fn clamped(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let c = |v: f64| v.clamp(0.0, 1.0);
        let (x0, x1) = (c(x0), c(x1));
        let (y0, y1) = (c(y0), c(y1));
        Self { x_min: x0.min(x1), x_max: x0.max(x1), y_min: y0.min(y1), y_max: y0.max(y1) }
    }

    pub const FULL: BBox = BBox { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    #[inline]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    #[inline]
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    #[inline]
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// Coordinates in storage order.
    #[inline]
    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.x_max, self.y_min, self.y_max]
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union. Two boxes whose union has zero area give 0.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).min(1.0)
        }
    }

    /// Smallest box containing both `self` and `other`.
    pub fn enclose(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            x_max: self.x_max.max(other.x_max),
            y_min: self.y_min.min(other.y_min),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x_min <= other.x_min && other.x_max <= self.x_max && self.y_min <= other.y_min && other.y_max <= self.y_max
    }

    /// Euclidean distance between the two box centers.
    pub fn center_distance(&self, other: &BBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        math::hypot(ax - bx, ay - by)
    }

    /// Shifts the box, failing if the result leaves the unit square.
    pub fn translate(&self, dx: f64, dy: f64) -> Result<BBox> {
        BBox::new(self.x_min + dx, self.x_max + dx, self.y_min + dy, self.y_max + dy)
    }
}

pub fn area(b: &BBox) -> f64 {
    b.area()
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

pub fn enclose(a: &BBox, b: &BBox) -> BBox {
    a.enclose(b)
}

pub fn center(b: &BBox) -> (f64, f64) {
    b.center()
}

pub fn center_distance(a: &BBox, b: &BBox) -> f64 {
    a.center_distance(b)
}
