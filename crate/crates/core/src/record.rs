//! Detection, ground-truth and prediction records.

use alloc::string::String;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::vocab::{ClassId, RelationId, Triplet, TripletVocabulary};

fn check_score(score: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(Error::InvalidScore(score))
    }
}

/// One box produced by an upstream detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub label: ClassId,
    pub score: f64,
    pub bbox: BBox,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, label: ClassId, score: f64, bbox: BBox) -> Result<Self> {
        Ok(Self { image_id: image_id.into(), label, score: check_score(score)?, bbox })
    }
}

/// An annotated relationship. Attribute relations store the single box twice.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRelation {
    pub image_id: String,
    pub label1: ClassId,
    pub box1: BBox,
    pub relation: RelationId,
    pub label2: ClassId,
    pub box2: BBox,
}

impl GroundTruthRelation {
    /// Validates the triplet and applies the attribute storage convention.
    pub fn new(
        vocab: &TripletVocabulary,
        image_id: impl Into<String>,
        triplet: Triplet,
        box1: BBox,
        box2: BBox,
    ) -> Result<Self> {
        vocab.check(&triplet)?;
        let box2 = if vocab.is_attribute(&triplet) { box1 } else { box2 };
        Ok(Self {
            image_id: image_id.into(),
            label1: triplet.label1,
            box1,
            relation: triplet.relation,
            label2: triplet.label2,
            box2,
        })
    }

    pub fn triplet(&self) -> Triplet {
        Triplet::new(self.label1, self.relation, self.label2)
    }

    pub fn phrase_box(&self) -> BBox {
        self.box1.enclose(&self.box2)
    }
}

/// A scored relationship emitted by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationshipPrediction {
    pub image_id: String,
    pub score: f64,
    pub label1: ClassId,
    pub box1: BBox,
    pub relation: RelationId,
    pub label2: ClassId,
    pub box2: BBox,
}

impl RelationshipPrediction {
    pub fn new(
        vocab: &TripletVocabulary,
        image_id: impl Into<String>,
        triplet: Triplet,
        box1: BBox,
        box2: BBox,
        score: f64,
    ) -> Result<Self> {
        vocab.check(&triplet)?;
        let box2 = if vocab.is_attribute(&triplet) { box1 } else { box2 };
        Ok(Self {
            image_id: image_id.into(),
            score: check_score(score)?,
            label1: triplet.label1,
            box1,
            relation: triplet.relation,
            label2: triplet.label2,
            box2,
        })
    }

    pub fn triplet(&self) -> Triplet {
        Triplet::new(self.label1, self.relation, self.label2)
    }

    pub fn phrase_box(&self) -> BBox {
        self.box1.enclose(&self.box2)
    }

    /// The same relationship as a ground-truth record (score dropped).
    pub fn to_ground_truth(&self) -> GroundTruthRelation {
        GroundTruthRelation {
            image_id: self.image_id.clone(),
            label1: self.label1,
            box1: self.box1,
            relation: self.relation,
            label2: self.label2,
            box2: self.box2,
        }
    }
}
