//! Brute-force references written against the plain problem statement.
//! Nothing here calls into the metric or candidate code under test.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vrd_core::gbdt::BoostedModel;
use vrd_core::pairfeat::extract_pair_features;
use vrd_core::{BBox, ClassId, Detection, GroundTruthRelation, RelationId, RelationshipPrediction, TripletVocabulary};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let [ax0, ax1, ay0, ay1] = a;
    let [bx0, bx1, by0, by1] = b;
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn hull(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0].min(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].max(b[3])]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalars {
    pub map_rel: f64,
    pub recall_at_n: f64,
    pub map_phrase: f64,
    pub final_score: f64,
}

type Key = (u32, u32, u32);

fn key(label1: ClassId, relation: RelationId, label2: ClassId) -> Key {
    (label1.0, relation.0, label2.0)
}

/// Interpolated AP: sum over recall steps of the best precision reached at
/// that recall or beyond.
fn ap(flags: &[bool], num_gt: usize) -> f64 {
    let mut curve = Vec::new();
    let mut tp = 0usize;
    for (k, &f) in flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        curve.push((tp as f64 / num_gt as f64, tp as f64 / (k + 1) as f64));
    }
    let mut total = 0.0;
    let mut prev_recall = 0.0;
    for &(r, _) in &curve {
        if r > prev_recall {
            let best = curve.iter().filter(|(r2, _)| *r2 >= r).map(|(_, p)| *p).fold(0.0, f64::max);
            total += (r - prev_recall) * best;
            prev_recall = r;
        }
    }
    total
}

/// Greedy one-to-one matching of `order` (already ranked) against `gts`.
fn greedy(preds: &[&RelationshipPrediction], gts: &[&GroundTruthRelation], thr: f64, phrase: bool) -> Vec<bool> {
    let mut used = vec![false; gts.len()];
    preds
        .iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if used[g] || key(p.label1, p.relation, p.label2) != key(gt.label1, gt.relation, gt.label2) {
                    continue;
                }
                let q = if phrase {
                    let v = iou(hull(p.box1.coords(), p.box2.coords()), hull(gt.box1.coords(), gt.box2.coords()));
                    (v > thr).then_some(v)
                } else {
                    let a = iou(p.box1.coords(), gt.box1.coords());
                    let b = iou(p.box2.coords(), gt.box2.coords());
                    (a > thr && b > thr).then_some(a.min(b))
                };
                if let Some(q) = q {
                    if best.is_none_or(|(_, bq)| q > bq) {
                        best = Some((g, q));
                    }
                }
            }
            if let Some((g, _)) = best {
                used[g] = true;
                true
            } else {
                false
            }
        })
        .collect()
}

/// Equal scores are ranked by content (image, labels, coordinates), then by index.
fn rank_before(preds: &[RelationshipPrediction], a: usize, b: usize) -> std::cmp::Ordering {
    let (p, q) = (&preds[a], &preds[b]);
    let content = |r: &RelationshipPrediction| {
        let mut v = r.box1.coords().to_vec();
        v.extend(r.box2.coords());
        (r.image_id.clone(), key(r.label1, r.relation, r.label2), v)
    };
    let (cp, cq) = (content(p), content(q));
    q.score
        .partial_cmp(&p.score)
        .unwrap()
        .then(cp.0.cmp(&cq.0))
        .then(cp.1.cmp(&cq.1))
        .then(cp.2.partial_cmp(&cq.2).unwrap())
        .then(a.cmp(&b))
}

fn ranked(indices: &mut [usize], preds: &[RelationshipPrediction]) {
    indices.sort_by(|&a, &b| rank_before(preds, a, b));
}

/// Reference evaluation; `per_triplet` selects the AP grouping.
pub fn brute_force_eval(
    preds: &[RelationshipPrediction],
    gts: &[GroundTruthRelation],
    thr: f64,
    recall_n: usize,
    weights: [f64; 3],
    per_triplet: bool,
) -> Scalars {
    let group = |k: Key| if per_triplet { k } else { (u32::MAX, k.1, u32::MAX) };
    let mut images: Vec<&str> =
        preds.iter().map(|p| p.image_id.as_str()).chain(gts.iter().map(|g| g.image_id.as_str())).collect();
    images.sort();
    images.dedup();

    let mut num_gt: BTreeMap<Key, usize> = BTreeMap::new();
    for g in gts {
        *num_gt.entry(group(key(g.label1, g.relation, g.label2))).or_default() += 1;
    }

    let mut map = [0.0, 0.0];
    for (phrase_pass, slot) in [(false, 0usize), (true, 1)] {
        let mut sum = 0.0;
        for (&gk, &n) in &num_gt {
            // Matching inside a group and image is independent of other groups
            // because a prediction only ever matches its own triplet.
            let mut hits: Vec<(usize, bool)> = Vec::new();
            for img in &images {
                let mut p_idx: Vec<usize> = (0..preds.len())
                    .filter(|&i| {
                        preds[i].image_id == *img
                            && group(key(preds[i].label1, preds[i].relation, preds[i].label2)) == gk
                    })
                    .collect();
                ranked(&mut p_idx, preds);
                let g_list: Vec<&GroundTruthRelation> = gts
                    .iter()
                    .filter(|g| g.image_id == *img && group(key(g.label1, g.relation, g.label2)) == gk)
                    .collect();
                let p_list: Vec<&RelationshipPrediction> = p_idx.iter().map(|&i| &preds[i]).collect();
                let flags = greedy(&p_list, &g_list, thr, phrase_pass);
                hits.extend(p_idx.iter().copied().zip(flags));
            }
            let mut order: Vec<usize> = (0..hits.len()).collect();
            order.sort_by(|&a, &b| rank_before(preds, hits[a].0, hits[b].0));
            let flags: Vec<bool> = order.iter().map(|&k| hits[k].1).collect();
            sum += ap(&flags, n);
        }
        map[slot] = if num_gt.is_empty() { 0.0 } else { sum / num_gt.len() as f64 };
    }

    // Recall: rematch only the top-N predictions of each image.
    let mut recalled = 0usize;
    for img in &images {
        let mut p_idx: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].image_id == *img).collect();
        ranked(&mut p_idx, preds);
        p_idx.truncate(recall_n);
        let p_list: Vec<&RelationshipPrediction> = p_idx.iter().map(|&i| &preds[i]).collect();
        let g_list: Vec<&GroundTruthRelation> = gts.iter().filter(|g| g.image_id == *img).collect();
        recalled += greedy(&p_list, &g_list, thr, false).iter().filter(|&&f| f).count();
    }
    let recall = if gts.is_empty() { 0.0 } else { recalled as f64 / gts.len() as f64 };
    Scalars {
        map_rel: map[0],
        recall_at_n: recall,
        map_phrase: map[1],
        final_score: weights[0] * map[0] + weights[1] * recall + weights[2] * map[1],
    }
}

/// One ranked candidate from the exhaustive reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefCandidate {
    pub d1: usize,
    pub d2: usize,
    pub relation: RelationId,
    pub c_c: f64,
}

/// Exhaustive top-K by repeated maximum selection.
pub fn brute_force_top_k(
    dets: &[Detection],
    model: &BoostedModel,
    vocab: &TripletVocabulary,
    max_boxes: usize,
    top_k: usize,
) -> Vec<RefCandidate> {
    let mut remaining: Vec<usize> = (0..dets.len()).collect();
    let mut kept = Vec::new();
    while kept.len() < max_boxes && !remaining.is_empty() {
        let mut best = 0;
        for k in 1..remaining.len() {
            let (a, b) = (remaining[k], remaining[best]);
            if dets[a].score > dets[b].score || (dets[a].score == dets[b].score && a < b) {
                best = k;
            }
        }
        kept.push(remaining.remove(best));
    }

    let mut pool = Vec::new();
    for &i in &kept {
        for &j in &kept {
            if i == j {
                continue;
            }
            for r in 0..vocab.num_relations() as u32 {
                let t = vrd_core::Triplet::new(dets[i].label, RelationId(r), dets[j].label);
                if !vocab.contains(&t) || vocab.is_attribute(&t) {
                    continue;
                }
                let f = extract_pair_features(&dets[i], &dets[j], RelationId(r), vocab).unwrap();
                let f_r = model.predict_pair(&f).unwrap();
                pool.push(RefCandidate {
                    d1: i,
                    d2: j,
                    relation: RelationId(r),
                    c_c: f_r * (dets[i].score * dets[j].score).sqrt(),
                });
            }
        }
    }

    let better = |a: &RefCandidate, b: &RefCandidate| {
        if a.c_c != b.c_c {
            return a.c_c > b.c_c;
        }
        (a.d1, a.d2, a.relation.0) < (b.d1, b.d2, b.relation.0)
    };
    let mut out = Vec::new();
    while out.len() < top_k && !pool.is_empty() {
        let mut best = 0;
        for k in 1..pool.len() {
            if better(&pool[k], &pool[best]) {
                best = k;
            }
        }
        out.push(pool.swap_remove(best));
    }
    out
}

/// Box on a coarse grid so that equal and overlapping boxes are common.
pub fn grid_box<R: Rng>(rng: &mut R) -> BBox {
    let x0 = rng.random_range(0..4) as f64 * 0.2;
    let y0 = rng.random_range(0..4) as f64 * 0.2;
    let w = rng.random_range(1..=2) as f64 * 0.1 + if rng.random_bool(0.3) { 0.03 } else { 0.0 };
    let h = rng.random_range(1..=2) as f64 * 0.1;
    BBox::new(x0, (x0 + w).min(1.0), y0, (y0 + h).min(1.0)).unwrap()
}

/// Nearby copy of `b`, sometimes shifted past the match threshold.
pub fn perturb<R: Rng>(rng: &mut R, b: &BBox) -> BBox {
    let s = [0.0, 0.01, 0.03, 0.08][rng.random_range(0..4)];
    let dx = rng.random_range(-1.0..=1.0) * s;
    let dy = rng.random_range(-1.0..=1.0) * s;
    let [x0, x1, y0, y1] = b.coords();
    BBox::clamped(x0 + dx, x1 + dx, y0 + dy, y1 + dy)
}

/// Scores drawn from a few values so ties occur.
pub fn tie_score<R: Rng>(rng: &mut R) -> f64 {
    [0.25, 0.5, 0.5, 0.75, 0.9, 1.0][rng.random_range(0..6)]
}

/// A random evaluation instance: up to 5 images, 6 predictions and 4 GT.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    vocab: &TripletVocabulary,
) -> (Vec<RelationshipPrediction>, Vec<GroundTruthRelation>) {
    let triplets = vocab.triplets();
    let n_images = rng.random_range(1..=5);
    let images: Vec<String> = (0..n_images).map(|k| format!("im{k}")).collect();
    let n_gt = rng.random_range(0..=4);
    let mut gts = Vec::new();
    for _ in 0..n_gt {
        let t = triplets[rng.random_range(0..triplets.len())];
        let img = &images[rng.random_range(0..images.len())];
        gts.push(GroundTruthRelation::new(vocab, img.clone(), t, grid_box(rng), grid_box(rng)).unwrap());
    }
    let n_pred = rng.random_range(0..=6);
    let mut preds = Vec::new();
    for _ in 0..n_pred {
        let p = if !gts.is_empty() && rng.random_bool(0.7) {
            let g = &gts[rng.random_range(0..gts.len())];
            let t = if rng.random_bool(0.85) { g.triplet() } else { triplets[rng.random_range(0..triplets.len())] };
            let img = if rng.random_bool(0.9) {
                g.image_id.clone()
            } else {
                images[rng.random_range(0..images.len())].clone()
            };
            RelationshipPrediction::new(vocab, img, t, perturb(rng, &g.box1), perturb(rng, &g.box2), tie_score(rng))
        } else {
            let t = triplets[rng.random_range(0..triplets.len())];
            let img = images[rng.random_range(0..images.len())].clone();
            RelationshipPrediction::new(vocab, img, t, grid_box(rng), grid_box(rng), tie_score(rng))
        };
        preds.push(p.unwrap());
    }
    (preds, gts)
}

/// Small trained model over the default synthetic vocabulary.
pub fn small_model(seed: u64) -> (BoostedModel, TripletVocabulary) {
    use vrd_core::gbdt::{train, Objective, TrainConfig};
    use vrd_core::synth::{generate, SynthConfig};
    use vrd_core::training::{build_training_set, SamplingConfig};
    let world = generate(&SynthConfig { num_images: 60, seed, ..SynthConfig::default() }).unwrap();
    let vocab = vrd_core::synth::default_vocabulary();
    let pairs = build_training_set(&world.detections, &world.ground_truth, &vocab, &SamplingConfig::default()).unwrap();
    let cfg = TrainConfig { num_rounds: 20, seed, ..TrainConfig::default() };
    let (model, _) = train(&pairs.dataset(), &pairs.labels, &cfg, &Objective::cross_entropy()).unwrap();
    (model, vocab)
}

/// Random detections of object classes, with frequent score ties.
pub fn random_detections<R: Rng>(rng: &mut R, vocab: &TripletVocabulary, max: usize) -> Vec<Detection> {
    let objects: Vec<ClassId> = (0..vocab.num_classes() as u32)
        .map(ClassId)
        .filter(|&c| vocab.pair_triplets().any(|t| t.label1 == c || t.label2 == c))
        .collect();
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| {
            let label = objects[rng.random_range(0..objects.len())];
            let x0 = rng.random_range(0.0..0.8);
            let y0 = rng.random_range(0.0..0.8);
            let b = BBox::new(x0, x0 + rng.random_range(0.02..0.2), y0, y0 + rng.random_range(0.02..0.2)).unwrap();
            let score = if rng.random_bool(0.3) { 0.5 } else { rng.random_range(0.0..=1.0) };
            Detection::new("im", label, score, b).unwrap()
        })
        .collect()
}
