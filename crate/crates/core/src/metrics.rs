//! Relationship detection metrics: mAP over relationships, Recall@N and mAP
//! over phrases, combined by fixed weights.
//!
//! Matching is greedy and one-to-one within an image: predictions are visited
//! by descending score (ties by input position) and each claims the best
//! still-unmatched ground truth with the same triplet whose boxes pass the
//! strict `IoU > threshold` test. AP uses all-point interpolation of the
//! precision envelope. Groups without ground truth are left out of the mean.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::record::{GroundTruthRelation, RelationshipPrediction};
use crate::vocab::{RelationId, Triplet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApGrouping {
    PerRelation,
    PerTriplet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Weights of (mAP_rel, Recall@N, mAP_phrase).
    pub weights: [f64; 3],
    pub recall_n: usize,
    pub grouping: ApGrouping,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5, weights: [0.4, 0.2, 0.4], recall_n: 100, grouping: ApGrouping::PerRelation }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("iou_threshold must be in (0, 1), got {}", self.iou_threshold)));
        }
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "weights must be non-negative and sum to 1, got {:?}",
                self.weights
            )));
        }
        if self.recall_n < 1 {
            return Err(Error::InvalidConfig("recall_n must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupKey {
    Relation(RelationId),
    Triplet(Triplet),
}

impl GroupKey {
    fn of(t: Triplet, grouping: ApGrouping) -> Self {
        match grouping {
            ApGrouping::PerRelation => GroupKey::Relation(t.relation),
            ApGrouping::PerTriplet => GroupKey::Triplet(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAp {
    pub key: GroupKey,
    pub num_gt: usize,
    pub num_predictions: usize,
    pub ap_rel: f64,
    pub ap_phrase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub map_rel: f64,
    pub recall_at_n: f64,
    pub map_phrase: f64,
    pub final_score: f64,
    pub num_predictions: usize,
    pub num_ground_truth: usize,
    /// Groups with at least one ground truth, ascending by key.
    pub groups: Vec<GroupAp>,
}

pub fn match_relationship(pred: &RelationshipPrediction, gt: &GroundTruthRelation, thr: f64) -> bool {
    pred.triplet() == gt.triplet() && pred.box1.iou(&gt.box1) > thr && pred.box2.iou(&gt.box2) > thr
}

pub fn match_phrase(pred: &RelationshipPrediction, gt: &GroundTruthRelation, thr: f64) -> bool {
    pred.triplet() == gt.triplet() && pred.phrase_box().iou(&gt.phrase_box()) > thr
}

/// All-point interpolated AP of a ranked list of `(score, is_true_positive)`.
///
/// The list is ranked here by descending score; equal scores keep their
/// given order. Returns 0 when `num_gt` is 0.
pub fn average_precision(scored: &[(f64, bool)], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0).then(a.cmp(&b)));
    let flags: Vec<bool> = order.iter().map(|&i| scored[i].1).collect();
    ranked_ap(&flags, num_gt)
}

/// AP of true-positive flags already in rank order.
fn ranked_ap(flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for (i, &hit) in flags.iter().enumerate() {
        tp += usize::from(hit);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        if precision[i + 1] > precision[i] {
            precision[i] = precision[i + 1];
        }
    }
    let sum: f64 = flags.iter().zip(&precision).filter(|(hit, _)| **hit).map(|(_, p)| *p).sum();
    sum / num_gt as f64
}

/// Per-prediction outcome of one image's matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PredictionOutcome {
    pub rel_tp: bool,
    pub phrase_tp: bool,
    /// Rank within its image (0 = highest score).
    pub rank_in_image: usize,
}

/// Ranking order: descending score, then record content, then input index.
///
/// Ordering equal scores by content makes every metric independent of the
/// input order; only exact duplicates fall through to the index, and those
/// are interchangeable.
pub fn prediction_order(a: &RelationshipPrediction, b: &RelationshipPrediction) -> Ordering {
    let boxes = |p: &RelationshipPrediction| {
        let [a, b, c, d] = p.box1.coords();
        let [e, f, g, h] = p.box2.coords();
        [a, b, c, d, e, f, g, h]
    };
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| (a.label1, a.relation, a.label2).cmp(&(b.label1, b.relation, b.label2)))
        .then_with(|| {
            boxes(a)
                .iter()
                .zip(boxes(b).iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

fn by_score(preds: &[RelationshipPrediction]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| prediction_order(&preds[a], &preds[b]).then(a.cmp(&b))
}

fn greedy_match<Q>(pred: &RelationshipPrediction, gts: &[&GroundTruthRelation], taken: &mut [bool], quality: Q) -> bool
where
    Q: Fn(&RelationshipPrediction, &GroundTruthRelation) -> Option<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (g, gt) in gts.iter().enumerate() {
        if taken[g] {
            continue;
        }
        if let Some(q) = quality(pred, gt) {
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((g, q));
            }
        }
    }
    match best {
        Some((g, _)) => {
            taken[g] = true;
            true
        }
        None => false,
    }
}

/// Matches the predictions of one image against its ground truth.
///
/// `pred_idx` and `gt_idx` select the image's records; the returned outcomes
/// are aligned with `pred_idx`.
pub fn match_image(
    preds: &[RelationshipPrediction],
    pred_idx: &[usize],
    gts: &[GroundTruthRelation],
    gt_idx: &[usize],
    thr: f64,
) -> Vec<PredictionOutcome> {
    let image_gts: Vec<&GroundTruthRelation> = gt_idx.iter().map(|&g| &gts[g]).collect();
    let mut order: Vec<usize> = (0..pred_idx.len()).collect();
    let cmp = by_score(preds);
    order.sort_by(|&a, &b| cmp(&pred_idx[a], &pred_idx[b]));

    let mut rel_taken = alloc::vec![false; image_gts.len()];
    let mut phrase_taken = alloc::vec![false; image_gts.len()];
    let mut out = alloc::vec![PredictionOutcome::default(); pred_idx.len()];
    for (rank, &local) in order.iter().enumerate() {
        let p = &preds[pred_idx[local]];
        let rel_tp = greedy_match(p, &image_gts, &mut rel_taken, |p, g| {
            match_relationship(p, g, thr).then(|| p.box1.iou(&g.box1).min(p.box2.iou(&g.box2)))
        });
        let phrase_tp = greedy_match(p, &image_gts, &mut phrase_taken, |p, g| {
            match_phrase(p, g, thr).then(|| p.phrase_box().iou(&g.phrase_box()))
        });
        out[local] = PredictionOutcome { rel_tp, phrase_tp, rank_in_image: rank };
    }
    out
}

/// Record positions of each image's predictions and ground truth, keyed by
/// image id in ascending order.
pub fn index_images<'a>(
    preds: &'a [RelationshipPrediction],
    gts: &'a [GroundTruthRelation],
) -> BTreeMap<&'a str, (Vec<usize>, Vec<usize>)> {
    let mut images: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, p) in preds.iter().enumerate() {
        images.entry(p.image_id.as_str()).or_default().0.push(i);
    }
    for (i, g) in gts.iter().enumerate() {
        images.entry(g.image_id.as_str()).or_default().1.push(i);
    }
    images
}

/// Combines per-prediction outcomes (indexed like `preds`) into the report.
pub fn accumulate(
    preds: &[RelationshipPrediction],
    gts: &[GroundTruthRelation],
    outcomes: &[PredictionOutcome],
    cfg: &EvalConfig,
) -> EvalReport {
    debug_assert_eq!(outcomes.len(), preds.len());
    let mut num_gt: BTreeMap<GroupKey, usize> = BTreeMap::new();
    for g in gts {
        *num_gt.entry(GroupKey::of(g.triplet(), cfg.grouping)).or_default() += 1;
    }
    let mut ranked: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for (i, p) in preds.iter().enumerate() {
        let key = GroupKey::of(p.triplet(), cfg.grouping);
        if num_gt.contains_key(&key) {
            ranked.entry(key).or_default().push(i);
        }
    }

    let mut groups = Vec::with_capacity(num_gt.len());
    for (&key, &n) in &num_gt {
        let mut members = ranked.remove(&key).unwrap_or_default();
        members.sort_by(by_score(preds));
        let rel: Vec<bool> = members.iter().map(|&i| outcomes[i].rel_tp).collect();
        let phrase: Vec<bool> = members.iter().map(|&i| outcomes[i].phrase_tp).collect();
        groups.push(GroupAp {
            key,
            num_gt: n,
            num_predictions: members.len(),
            ap_rel: ranked_ap(&rel, n),
            ap_phrase: ranked_ap(&phrase, n),
        });
    }

    let mean = |f: fn(&GroupAp) -> f64| {
        if groups.is_empty() {
            0.0
        } else {
            groups.iter().map(f).sum::<f64>() / groups.len() as f64
        }
    };
    let map_rel = mean(|g| g.ap_rel);
    let map_phrase = mean(|g| g.ap_phrase);
    let recalled = outcomes.iter().filter(|o| o.rel_tp && o.rank_in_image < cfg.recall_n).count();
    let recall_at_n = if gts.is_empty() { 0.0 } else { recalled as f64 / gts.len() as f64 };
    let [w_rel, w_recall, w_phrase] = cfg.weights;
    EvalReport {
        map_rel,
        recall_at_n,
        map_phrase,
        final_score: w_rel * map_rel + w_recall * recall_at_n + w_phrase * map_phrase,
        num_predictions: preds.len(),
        num_ground_truth: gts.len(),
        groups,
    }
}

pub fn evaluate(preds: &[RelationshipPrediction], gts: &[GroundTruthRelation], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let mut outcomes = alloc::vec![PredictionOutcome::default(); preds.len()];
    for (p_idx, g_idx) in index_images(preds, gts).values() {
        let image = match_image(preds, p_idx, gts, g_idx, cfg.iou_threshold);
        for (&i, o) in p_idx.iter().zip(image) {
            outcomes[i] = o;
        }
    }
    Ok(accumulate(preds, gts, &outcomes, cfg))
}
