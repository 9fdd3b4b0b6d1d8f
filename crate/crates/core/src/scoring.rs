//! Candidate generation and the two output streams.
//!
//! The pair stream scores every vocabulary-valid `(box_i, relation, box_j)`
//! over the highest-confidence boxes of an image and keeps the best `top_k`
//! by combined confidence. The attribute stream decodes detector classes that
//! each stand for one whole "is" triplet. The final output is the plain
//! concatenation of both streams.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::gbdt::BoostedModel;
use crate::math;
use crate::pairfeat::extract_pair_features;
use crate::record::{Detection, RelationshipPrediction};
use crate::vocab::{ClassId, LabelResolver, RelationId, Triplet, TripletVocabulary};

/// `f_r * sqrt(c1 * c2)`.
#[inline]
pub fn combine_confidence(f_r: f64, c1: f64, c2: f64) -> f64 {
    f_r * math::sqrt(c1 * c2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateConfig {
    pub max_boxes: usize,
    pub top_k: usize,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self { max_boxes: 100, top_k: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationshipCandidate {
    pub image_id: String,
    /// Positions of the two detections in the input slice.
    pub d1_index: usize,
    pub d2_index: usize,
    pub d1: Detection,
    pub d2: Detection,
    pub relation: RelationId,
    pub f_r: f64,
    pub c_c: f64,
}

impl RelationshipCandidate {
    pub fn triplet(&self) -> Triplet {
        Triplet::new(self.d1.label, self.relation, self.d2.label)
    }

    pub fn to_prediction(&self) -> RelationshipPrediction {
        RelationshipPrediction {
            image_id: self.image_id.clone(),
            score: self.c_c,
            label1: self.d1.label,
            box1: self.d1.bbox,
            relation: self.relation,
            label2: self.d2.label,
            box2: self.d2.bbox,
        }
    }
}

/// Input positions of the `max_boxes` highest-scoring detections, ascending.
/// Equal scores prefer the earlier detection.
pub fn select_boxes(dets: &[Detection], max_boxes: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    if dets.len() > max_boxes {
        order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
        order.truncate(max_boxes);
        order.sort_unstable();
    }
    order
}

/// Descending `c_c`; ties by earlier subject, earlier object, lower relation.
pub fn candidate_order(a: &RelationshipCandidate, b: &RelationshipCandidate) -> Ordering {
    b.c_c
        .total_cmp(&a.c_c)
        .then(a.d1_index.cmp(&b.d1_index))
        .then(a.d2_index.cmp(&b.d2_index))
        .then(a.relation.cmp(&b.relation))
}

fn single_image(dets: &[Detection]) -> Result<()> {
    if let Some(first) = dets.first() {
        if let Some(other) = dets.iter().find(|d| d.image_id != first.image_id) {
            return Err(Error::InvalidConfig(format!(
                "candidate generation got detections from two images: `{}` and `{}`",
                first.image_id, other.image_id
            )));
        }
    }
    Ok(())
}

pub fn generate_candidates(
    dets: &[Detection],
    model: &BoostedModel,
    vocab: &TripletVocabulary,
    cfg: &CandidateConfig,
) -> Result<Vec<RelationshipCandidate>> {
    single_image(dets)?;
    let kept = select_boxes(dets, cfg.max_boxes);
    let mut out = Vec::new();
    for &i in &kept {
        for &j in &kept {
            if i == j {
                continue;
            }
            let (d1, d2) = (&dets[i], &dets[j]);
            for &relation in vocab.relations_for(d1.label, d2.label) {
                let features = extract_pair_features(d1, d2, relation, vocab)?;
                let f_r = model.predict_pair(&features)?;
                out.push(RelationshipCandidate {
                    image_id: d1.image_id.clone(),
                    d1_index: i,
                    d2_index: j,
                    d1: d1.clone(),
                    d2: d2.clone(),
                    relation,
                    f_r,
                    c_c: combine_confidence(f_r, d1.score, d2.score),
                });
            }
        }
    }
    out.sort_by(candidate_order);
    out.truncate(cfg.top_k);
    Ok(out)
}

/// Bijection between "is" triplets and synthetic detector class ids.
///
/// Class `k` is the `k`-th attribute triplet in vocabulary order; its name in
/// detection files is `label1|is|attribute`.
#[derive(Debug, Clone)]
pub struct IsTripletClassMap {
    triplets: Vec<Triplet>,
    names: Vec<String>,
    by_name: HashMap<String, ClassId>,
    by_triplet: HashMap<Triplet, ClassId>,
}

impl IsTripletClassMap {
    pub fn from_vocabulary(vocab: &TripletVocabulary) -> Self {
        let triplets: Vec<Triplet> = vocab.is_triplets().copied().collect();
        let names: Vec<String> = triplets.iter().map(|t| Self::class_name_for(vocab, t)).collect();
        let by_name = names.iter().enumerate().map(|(k, n)| (n.clone(), ClassId(k as u32))).collect();
        let by_triplet = triplets.iter().enumerate().map(|(k, t)| (*t, ClassId(k as u32))).collect();
        Self { triplets, names, by_name, by_triplet }
    }

    pub fn class_name_for(vocab: &TripletVocabulary, t: &Triplet) -> String {
        format!("{}|{}|{}", vocab.class_name(t.label1), vocab.relation_name(t.relation), vocab.class_name(t.label2))
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn triplet(&self, class: ClassId) -> Option<Triplet> {
        self.triplets.get(class.0 as usize).copied()
    }

    pub fn class_of(&self, t: &Triplet) -> Option<ClassId> {
        self.by_triplet.get(t).copied()
    }

    pub fn name(&self, class: ClassId) -> Option<&str> {
        self.names.get(class.0 as usize).map(String::as_str)
    }
}

impl LabelResolver for IsTripletClassMap {
    fn resolve(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(name).copied()
    }

    fn name_of(&self, id: ClassId) -> Option<&str> {
        self.name(id)
    }
}

/// One attribute prediction per detection, order preserved.
pub fn decode_is_predictions(dets: &[Detection], map: &IsTripletClassMap) -> Result<Vec<RelationshipPrediction>> {
    dets.iter()
        .map(|d| {
            let t = map.triplet(d.label).ok_or(Error::UnmappedClass(d.label.0))?;
            Ok(RelationshipPrediction {
                image_id: d.image_id.to_string(),
                score: d.score,
                label1: t.label1,
                box1: d.bbox,
                relation: t.relation,
                label2: t.label2,
                box2: d.bbox,
            })
        })
        .collect()
}

pub fn ensemble_concat(
    pair_preds: Vec<RelationshipPrediction>,
    is_preds: Vec<RelationshipPrediction>,
) -> Vec<RelationshipPrediction> {
    let mut out = pair_preds;
    out.extend(is_preds);
    out
}

/// Full output for one image: top pair candidates followed by decoded
/// attribute detections.
pub fn score_image(
    pair_dets: &[Detection],
    is_dets: &[Detection],
    model: &BoostedModel,
    vocab: &TripletVocabulary,
    map: &IsTripletClassMap,
    cfg: &CandidateConfig,
) -> Result<Vec<RelationshipPrediction>> {
    let pairs = generate_candidates(pair_dets, model, vocab, cfg)?;
    let pair_preds = pairs.iter().map(RelationshipCandidate::to_prediction).collect();
    Ok(ensemble_concat(pair_preds, decode_is_predictions(is_dets, map)?))
}

/// Splits records by image id, keeping first-appearance order of images and
/// input order within each image.
pub fn group_by_image<T, F>(items: &[T], key: F) -> Vec<(String, Vec<T>)>
where
    T: Clone,
    F: Fn(&T) -> &str,
{
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<T>)> = Vec::new();
    for item in items {
        let k = key(item);
        let slot = *index.entry(k).or_insert_with(|| {
            groups.push((k.to_string(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(item.clone());
    }
    groups
}
