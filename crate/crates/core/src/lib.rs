//! Allocation-only core of the relationship detection toolkit.
//!
//! Everything in this crate is pure computation over in-memory records:
//! box geometry, the triplet vocabulary, pair features, a gradient-boosted
//! tree learner, candidate scoring, the challenge metrics and a synthetic
//! world generator. File formats, threading and the command line live in the
//! `vrd` crate.

#![no_std]
// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod gbdt;
pub mod geometry;
pub mod math;
pub mod metrics;
pub mod pairfeat;
pub mod record;
pub mod rng;
pub mod scoring;
pub mod synth;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
pub use geometry::BBox;
pub use record::{Detection, GroundTruthRelation, RelationshipPrediction};
pub use vocab::{ClassId, RelationId, Triplet, TripletVocabulary};
