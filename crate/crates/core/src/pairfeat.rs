//! Features of an ordered detection pair under a candidate relation.
//!
//! Layout (fixed, 15 values):
//!
//! | index | feature                          |
//! |-------|----------------------------------|
//! | 0     | subject label (categorical)      |
//! | 1     | object label (categorical)       |
//! | 2     | relation (categorical)           |
//! | 3     | center distance                  |
//! | 4     | center distance / (area1+area2)  |
//! | 5, 6  | signed center offset cx1-cx2, cy1-cy2 |
//! | 7..11 | box1 x_min, x_max, y_min, y_max  |
//! | 11..15| box2 x_min, x_max, y_min, y_max  |
//!
//! "Distance of boxes" is taken to mean the distance between box centers.
//! Detector confidences are deliberately absent; they only enter the final
//! candidate score.

use crate::error::Result;
use crate::geometry::BBox;
use crate::record::Detection;
use crate::vocab::{RelationId, Triplet, TripletVocabulary};

pub const NUM_FEATURES: usize = 15;
pub const NUM_NUMERIC: usize = 12;
pub const CATEGORICAL_FEATURES: [usize; 3] = [0, 1, 2];

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "label1",
    "label2",
    "relation",
    "center_distance",
    "relative_distance",
    "rel_dx",
    "rel_dy",
    "x_min1",
    "x_max1",
    "y_min1",
    "y_max1",
    "x_min2",
    "x_max2",
    "y_min2",
    "y_max2",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatureVector {
    pub triplet: Triplet,
    pub numeric: [f64; NUM_NUMERIC],
}

impl PairFeatureVector {
    pub fn center_distance(&self) -> f64 {
        self.numeric[0]
    }

    pub fn relative_distance(&self) -> f64 {
        self.numeric[1]
    }

    pub fn rel_dx(&self) -> f64 {
        self.numeric[2]
    }

    pub fn rel_dy(&self) -> f64 {
        self.numeric[3]
    }

    /// Flattened row with categorical ids encoded as integral floats.
    pub fn to_row(&self) -> [f64; NUM_FEATURES] {
        let mut row = [0.0; NUM_FEATURES];
        row[0] = f64::from(self.triplet.label1.0);
        row[1] = f64::from(self.triplet.label2.0);
        row[2] = f64::from(self.triplet.relation.0);
        row[3..].copy_from_slice(&self.numeric);
        row
    }
}

/// Geometry-only part of the feature vector; no vocabulary check.
pub fn pair_geometry(box1: &BBox, box2: &BBox) -> [f64; NUM_NUMERIC] {
    let (cx1, cy1) = box1.center();
    let (cx2, cy2) = box2.center();
    let dist = box1.center_distance(box2);
    let total_area = box1.area() + box2.area();
    let rel = if total_area > 0.0 { dist / total_area } else { 0.0 };
    let mut out = [0.0; NUM_NUMERIC];
    out[0] = dist;
    out[1] = rel;
    out[2] = cx1 - cx2;
    out[3] = cy1 - cy2;
    out[4..8].copy_from_slice(&box1.coords());
    out[8..12].copy_from_slice(&box2.coords());
    out
}

pub fn extract_pair_features(
    d1: &Detection,
    d2: &Detection,
    relation: RelationId,
    vocab: &TripletVocabulary,
) -> Result<PairFeatureVector> {
    let triplet = Triplet::new(d1.label, relation, d2.label);
    vocab.check(&triplet)?;
    Ok(PairFeatureVector { triplet, numeric: pair_geometry(&d1.bbox, &d2.bbox) })
}
