//! Labeled pair features for fitting the relationship coefficient.
//!
//! Every vocabulary-valid `(detection_i, relation, detection_j)` among an
//! image's top boxes is a candidate. It is positive when some ground-truth
//! relationship with the same triplet overlaps both boxes with
//! `IoU > iou_threshold`; all other candidates are negatives, of which a
//! fixed multiple of the positive count is sampled.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::gbdt::Dataset;
use crate::pairfeat::{extract_pair_features, PairFeatureVector};
use crate::record::{Detection, GroundTruthRelation};
use crate::rng::stage_rng;
use crate::scoring::{group_by_image, select_boxes};
use crate::vocab::TripletVocabulary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub negatives_per_positive: f64,
    pub iou_threshold: f64,
    pub max_boxes: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { negatives_per_positive: 3.0, iou_threshold: 0.5, max_boxes: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPairs {
    pub image_ids: Vec<String>,
    pub features: Vec<PairFeatureVector>,
    pub labels: Vec<bool>,
}

impl LabeledPairs {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    pub fn dataset(&self) -> Dataset {
        Dataset::from_pair_features(&self.features)
    }
}

pub fn build_training_set(
    dets: &[Detection],
    gts: &[GroundTruthRelation],
    vocab: &TripletVocabulary,
    cfg: &SamplingConfig,
) -> Result<LabeledPairs> {
    if !(cfg.negatives_per_positive >= 0.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "negatives_per_positive must be >= 0, got {}",
            cfg.negatives_per_positive
        )));
    }
    let gt_by_image = group_by_image(gts, |g| g.image_id.as_str());
    let find_gt = |image: &str| gt_by_image.iter().find(|(k, _)| k == image).map(|(_, v)| v.as_slice()).unwrap_or(&[]);

    // (image, features, label) in enumeration order.
    let mut all: Vec<(usize, PairFeatureVector, bool)> = Vec::new();
    let images = group_by_image(dets, |d| d.image_id.as_str());
    for (img_idx, (image, image_dets)) in images.iter().enumerate() {
        let image_gts: Vec<&GroundTruthRelation> =
            find_gt(image).iter().filter(|g| !vocab.is_attribute(&g.triplet())).collect();
        let kept = select_boxes(image_dets, cfg.max_boxes);
        for &i in &kept {
            for &j in &kept {
                if i == j {
                    continue;
                }
                let (d1, d2) = (&image_dets[i], &image_dets[j]);
                for &r in vocab.relations_for(d1.label, d2.label) {
                    let f = extract_pair_features(d1, d2, r, vocab)?;
                    let positive = image_gts.iter().any(|g| {
                        g.triplet() == f.triplet
                            && d1.bbox.iou(&g.box1) > cfg.iou_threshold
                            && d2.bbox.iou(&g.box2) > cfg.iou_threshold
                    });
                    all.push((img_idx, f, positive));
                }
            }
        }
    }

    let negatives: Vec<usize> = (0..all.len()).filter(|&k| !all[k].2).collect();
    let positives = all.len() - negatives.len();
    let wanted = crate::math::round(cfg.negatives_per_positive * positives as f64) as usize;
    let mut keep = alloc::vec![true; all.len()];
    if wanted < negatives.len() {
        for &k in &negatives {
            keep[k] = false;
        }
        let mut rng = stage_rng(cfg.seed, "training/negatives");
        for pick in index::sample(&mut rng, negatives.len(), wanted).iter() {
            keep[negatives[pick]] = true;
        }
    }

    let mut out = LabeledPairs::default();
    for ((img_idx, f, y), _) in all.into_iter().zip(keep).filter(|(_, k)| *k) {
        out.image_ids.push(images[img_idx].0.clone());
        out.features.push(f);
        out.labels.push(y);
    }
    Ok(out)
}
