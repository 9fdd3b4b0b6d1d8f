//! Image-level parallelism. Results never depend on the thread count.

use std::collections::HashMap;

use rayon::prelude::*;

use vrd_core::gbdt::BoostedModel;
use vrd_core::metrics::{accumulate, index_images, match_image, EvalConfig, EvalReport, PredictionOutcome};
use vrd_core::scoring::{group_by_image, score_image, CandidateConfig, IsTripletClassMap};
use vrd_core::{Detection, GroundTruthRelation, RelationshipPrediction, TripletVocabulary};

use crate::error::{Error, Result};

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    if threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Internal(e.to_string()))
}

/// Scores every image and concatenates results in first-appearance order of
/// images (object detections first, then images that only have attribute
/// detections).
pub fn score_images(
    pool: &rayon::ThreadPool,
    detections: &[Detection],
    is_detections: &[Detection],
    model: &BoostedModel,
    vocab: &TripletVocabulary,
    map: &IsTripletClassMap,
    cfg: &CandidateConfig,
) -> Result<Vec<RelationshipPrediction>> {
    let pair_groups = group_by_image(detections, |d| d.image_id.as_str());
    let is_groups = group_by_image(is_detections, |d| d.image_id.as_str());
    let mut images: Vec<(&[Detection], &[Detection])> = Vec::with_capacity(pair_groups.len());
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for (k, v) in &pair_groups {
        slot.insert(k.as_str(), images.len());
        images.push((v.as_slice(), &[]));
    }
    for (k, v) in &is_groups {
        match slot.get(k.as_str()) {
            Some(&i) => images[i].1 = v.as_slice(),
            None => images.push((&[], v.as_slice())),
        }
    }
    let per_image: Vec<Result<Vec<RelationshipPrediction>>> = pool.install(|| {
        images
            .par_iter()
            .map(|(pairs, attrs)| score_image(pairs, attrs, model, vocab, map, cfg).map_err(Error::from))
            .collect()
    });
    let mut out = Vec::new();
    for r in per_image {
        out.extend(r?);
    }
    Ok(out)
}

/// Same result as [`vrd_core::metrics::evaluate`], matching images in parallel.
pub fn evaluate(
    pool: &rayon::ThreadPool,
    preds: &[RelationshipPrediction],
    gts: &[GroundTruthRelation],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let images: Vec<(Vec<usize>, Vec<usize>)> = index_images(preds, gts).into_values().collect();
    let matched: Vec<Vec<PredictionOutcome>> =
        pool.install(|| images.par_iter().map(|(p, g)| match_image(preds, p, gts, g, cfg.iou_threshold)).collect());
    let mut outcomes = vec![PredictionOutcome::default(); preds.len()];
    for ((p_idx, _), image) in images.iter().zip(matched) {
        for (&i, o) in p_idx.iter().zip(image) {
            outcomes[i] = o;
        }
    }
    Ok(accumulate(preds, gts, &outcomes, cfg))
}
