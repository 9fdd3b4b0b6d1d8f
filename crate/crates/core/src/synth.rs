//! Seeded synthetic scenes with relationships planted as geometric rules.
//!
//! Planted rules read only what the pair features expose:
//!
//! * `above`: the subject center is higher (`cy1 < cy2`) and the horizontal
//!   center offset is below [`ABOVE_MAX_DX`].
//! * `near`: center distance below [`NEAR_DISTANCE`].
//!
//! Boxes are placed so that no pair sits within `ambiguity_margin` of a rule
//! boundary, which keeps the rules recoverable under small box jitter.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::math;
use crate::record::{Detection, GroundTruthRelation};
use crate::rng::{stage_rng, standard_normal, StageRng};
use crate::scoring::IsTripletClassMap;
use crate::vocab::{ClassId, Triplet, TripletVocabulary};

pub const NEAR_DISTANCE: f64 = 0.2;
pub const ABOVE_MAX_DX: f64 = 0.2;

/// Relations with a planted geometric rule.
pub const PLANTED_RELATIONS: [&str; 2] = ["above", "near"];

/// Built-in vocabulary: 5 classes, 3 relations, 8 pair and 4 attribute triplets.
pub fn default_vocabulary() -> TripletVocabulary {
    TripletVocabulary::from_names([
        ("Cup", "above", "Table"),
        ("Man", "above", "Table"),
        ("Cup", "above", "Cup"),
        ("Table", "above", "Table"),
        ("Man", "near", "Cup"),
        ("Cup", "near", "Man"),
        ("Man", "near", "Man"),
        ("Table", "near", "Cup"),
        ("Table", "is", "Wooden"),
        ("Table", "is", "Plastic"),
        ("Cup", "is", "Wooden"),
        ("Cup", "is", "Plastic"),
    ])
    .expect("built-in vocabulary has no duplicates")
}

/// Evaluates the planted rule for `relation` on an ordered box pair.
pub fn planted_rule(relation: &str, box1: &BBox, box2: &BBox) -> Option<bool> {
    let (cx1, cy1) = box1.center();
    let (cx2, cy2) = box2.center();
    match relation {
        "above" => Some(cy1 < cy2 && (cx1 - cx2).abs() < ABOVE_MAX_DX),
        "near" => Some(box1.center_distance(box2) < NEAR_DISTANCE),
        _ => None,
    }
}

/// Distance of a pair to the closest rule boundary.
fn boundary_slack(a: &BBox, b: &BBox) -> f64 {
    let (cx1, cy1) = a.center();
    let (cx2, cy2) = b.center();
    let dy = (cy1 - cy2).abs();
    let dx = ((cx1 - cx2).abs() - ABOVE_MAX_DX).abs();
    let dist = (a.center_distance(b) - NEAR_DISTANCE).abs();
    dy.min(dx).min(dist)
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_images: usize,
    /// Inclusive range of objects per image.
    pub boxes_per_image: (usize, usize),
    pub vocabulary: TripletVocabulary,
    /// Probability that a planted relation is dropped from the ground truth.
    pub rule_noise: f64,
    /// Standard deviation of the per-coordinate detection jitter.
    pub box_jitter: f64,
    /// Detection scores are uniform on this range.
    pub score_range: (f64, f64),
    /// Probability that an object able to carry an attribute gets one.
    pub attribute_prob: f64,
    /// Box side lengths are uniform on this range.
    pub box_size: (f64, f64),
    pub ambiguity_margin: f64,
    /// Class frequency follows `rank^-exponent`; 0 is uniform.
    pub class_power_law: f64,
    pub image_prefix: String,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_images: 200,
            boxes_per_image: (3, 6),
            vocabulary: default_vocabulary(),
            rule_noise: 0.05,
            box_jitter: 0.01,
            score_range: (0.5, 1.0),
            attribute_prob: 0.5,
            box_size: (0.08, 0.3),
            ambiguity_margin: 0.03,
            class_power_law: 0.0,
            image_prefix: String::from("img"),
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Same layout settings with all label and detector noise removed.
    pub fn noiseless(mut self) -> Self {
        self.rule_noise = 0.0;
        self.box_jitter = 0.0;
        self.score_range = (1.0, 1.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.vocabulary.pair_len() == 0 && self.vocabulary.is_len() == 0 {
            return bad("synthetic vocabulary has no triplets".into());
        }
        for t in self.vocabulary.pair_triplets() {
            let name = self.vocabulary.relation_name(t.relation);
            if !PLANTED_RELATIONS.contains(&name) {
                return bad(format!("no planted rule for relation `{name}`"));
            }
        }
        let (lo, hi) = self.boxes_per_image;
        if lo > hi {
            return bad(format!("boxes_per_image range {lo}..={hi} is empty"));
        }
        if !(0.0..1.0).contains(&self.rule_noise) {
            return bad(format!("rule_noise must be in [0, 1), got {}", self.rule_noise));
        }
        if !(0.0..=1.0).contains(&self.attribute_prob) {
            return bad(format!("attribute_prob must be in [0, 1], got {}", self.attribute_prob));
        }
        if !(self.box_jitter >= 0.0) {
            return bad(format!("box_jitter must be >= 0, got {}", self.box_jitter));
        }
        let (s0, s1) = self.score_range;
        if !(0.0 <= s0 && s0 <= s1 && s1 <= 1.0) {
            return bad(format!("score_range ({s0}, {s1}) must satisfy 0 <= lo <= hi <= 1"));
        }
        let (b0, b1) = self.box_size;
        if !(0.0 < b0 && b0 <= b1 && b1 <= 1.0) {
            return bad(format!("box_size ({b0}, {b1}) must satisfy 0 < lo <= hi <= 1"));
        }
        if !(self.ambiguity_margin >= 0.0) || !(self.class_power_law >= 0.0) {
            return bad("ambiguity_margin and class_power_law must be >= 0".into());
        }
        Ok(())
    }
}

/// Ground truth and simulated detector output for a set of images.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthWorld {
    pub images: Vec<String>,
    pub ground_truth: Vec<GroundTruthRelation>,
    /// Object detections feeding the pair stream.
    pub detections: Vec<Detection>,
    /// Attribute detections whose classes index [`IsTripletClassMap`].
    pub is_detections: Vec<Detection>,
}

/// A placed object: class plus true box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedObject {
    pub label: ClassId,
    pub bbox: BBox,
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    map: IsTripletClassMap,
    objects: Vec<ClassId>,
    weights: Vec<f64>,
    attributes: Vec<Vec<Triplet>>,
}

impl<'a> Generator<'a> {
    fn new(cfg: &'a SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let vocab = &cfg.vocabulary;
        let mut objects: Vec<ClassId> = Vec::new();
        let push = |objects: &mut Vec<ClassId>, c: ClassId| {
            if !objects.contains(&c) {
                objects.push(c);
            }
        };
        for t in vocab.pair_triplets() {
            push(&mut objects, t.label1);
            push(&mut objects, t.label2);
        }
        for t in vocab.is_triplets() {
            push(&mut objects, t.label1);
        }
        if objects.is_empty() {
            return Err(Error::InvalidConfig("synthetic vocabulary has no object classes".into()));
        }
        let weights = (0..objects.len()).map(|rank| math::powf((rank + 1) as f64, -cfg.class_power_law)).collect();
        let attributes =
            objects.iter().map(|&c| vocab.is_triplets().filter(|t| t.label1 == c).copied().collect()).collect();
        Ok(Self { cfg, map: IsTripletClassMap::from_vocabulary(vocab), objects, weights, attributes })
    }

    fn sample_class(&self, rng: &mut StageRng) -> usize {
        let total: f64 = self.weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (i, w) in self.weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        self.weights.len() - 1
    }

    fn sample_box(&self, rng: &mut StageRng) -> BBox {
        let (lo, hi) = self.cfg.box_size;
        let w = lo + (hi - lo) * rng.random::<f64>();
        let h = lo + (hi - lo) * rng.random::<f64>();
        let x = (1.0 - w) * rng.random::<f64>();
        let y = (1.0 - h) * rng.random::<f64>();
        BBox::clamped(x, x + w, y, y + h)
    }

    fn layout(&self, rng: &mut StageRng) -> Vec<(usize, BBox)> {
        let (lo, hi) = self.cfg.boxes_per_image;
        let n = rng.random_range(lo..=hi);
        let mut placed: Vec<(usize, BBox)> = Vec::with_capacity(n);
        for _ in 0..n {
            let class = self.sample_class(rng);
            for _attempt in 0..64 {
                let b = self.sample_box(rng);
                if placed.iter().all(|(_, p)| boundary_slack(p, &b) >= self.cfg.ambiguity_margin) {
                    placed.push((class, b));
                    break;
                }
            }
        }
        placed
    }

    fn jitter(&self, b: &BBox, rng: &mut StageRng) -> BBox {
        let s = self.cfg.box_jitter;
        if s == 0.0 {
            return *b;
        }
        let mut c = b.coords();
        for v in &mut c {
            *v += s * standard_normal(rng);
        }
        BBox::clamped(c[0], c[1], c[2], c[3])
    }

    fn score(&self, rng: &mut StageRng) -> f64 {
        let (lo, hi) = self.cfg.score_range;
        if lo == hi {
            lo
        } else {
            lo + (hi - lo) * rng.random::<f64>()
        }
    }

    fn image(
        &self,
        image_id: &str,
        objects: &[PlacedObject],
        attrs: &[Option<Triplet>],
        rng: &mut StageRng,
        world: &mut SynthWorld,
    ) -> Result<()> {
        let vocab = &self.cfg.vocabulary;
        for (i, a) in objects.iter().enumerate() {
            for (j, b) in objects.iter().enumerate() {
                if i == j {
                    continue;
                }
                for &r in vocab.relations_for(a.label, b.label) {
                    let holds = planted_rule(vocab.relation_name(r), &a.bbox, &b.bbox).unwrap_or(false);
                    let dropped = self.cfg.rule_noise > 0.0 && rng.random::<f64>() < self.cfg.rule_noise;
                    if holds && !dropped {
                        let t = Triplet::new(a.label, r, b.label);
                        world.ground_truth.push(GroundTruthRelation::new(vocab, image_id, t, a.bbox, b.bbox)?);
                    }
                }
            }
        }
        for (o, attr) in objects.iter().zip(attrs) {
            if let Some(t) = attr {
                world.ground_truth.push(GroundTruthRelation::new(vocab, image_id, *t, o.bbox, o.bbox)?);
            }
        }
        for o in objects {
            let bbox = self.jitter(&o.bbox, rng);
            let score = self.score(rng);
            world.detections.push(Detection::new(image_id, o.label, score, bbox)?);
        }
        for (o, attr) in objects.iter().zip(attrs) {
            if let Some(t) = attr {
                let class = self.map.class_of(t).expect("attribute triplet is mapped");
                let bbox = self.jitter(&o.bbox, rng);
                let score = self.score(rng);
                world.is_detections.push(Detection::new(image_id, class, score, bbox)?);
            }
        }
        Ok(())
    }
}

fn empty_world() -> SynthWorld {
    SynthWorld { images: Vec::new(), ground_truth: Vec::new(), detections: Vec::new(), is_detections: Vec::new() }
}

/// Generates `cfg.num_images` images. The output is a pure function of `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthWorld> {
    let gen = Generator::new(cfg)?;
    let mut rng = stage_rng(cfg.seed, "synth");
    let mut world = empty_world();
    for k in 0..cfg.num_images {
        let image_id = format!("{}{:06}", cfg.image_prefix, k);
        let layout = gen.layout(&mut rng);
        let objects: Vec<PlacedObject> =
            layout.iter().map(|&(c, bbox)| PlacedObject { label: gen.objects[c], bbox }).collect();
        let attrs: Vec<Option<Triplet>> = layout
            .iter()
            .map(|&(c, _)| {
                let options = &gen.attributes[c];
                if options.is_empty() || rng.random::<f64>() >= cfg.attribute_prob {
                    None
                } else {
                    Some(options[rng.random_range(0..options.len())])
                }
            })
            .collect();
        gen.image(&image_id, &objects, &attrs, &mut rng, &mut world)?;
        world.images.push(image_id);
    }
    Ok(world)
}

/// Builds one image from an explicit layout, applying the planted rules and
/// the configured noise. `attributes` pairs with `objects` by position.
pub fn generate_from_layout(
    cfg: &SynthConfig,
    image_id: &str,
    objects: &[PlacedObject],
    attributes: &[Option<Triplet>],
) -> Result<SynthWorld> {
    let gen = Generator::new(cfg)?;
    if attributes.len() != objects.len() {
        return Err(Error::DimensionMismatch { expected: objects.len(), got: attributes.len() });
    }
    let mut rng = stage_rng(cfg.seed, "synth/layout");
    let mut world = empty_world();
    gen.image(image_id, objects, attributes, &mut rng, &mut world)?;
    world.images.push(image_id.into());
    Ok(world)
}
