//! Binary model file.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "VRDGBDT\0"
//! version      u32
//! n_features   u32
//! n_cat        u32, then n_cat x u32 categorical feature indices
//! objective    u8 (0 = cross-entropy, 1 = focal), gamma f64, alpha f64
//! base_score   f64
//! learn_rate   f64
//! n_trees      u32, then per tree:
//!   n_nodes    u32, then per node a tag byte:
//!     0 leaf         value f64
//!     1 numeric      feature u32, threshold f64, left u32, right u32
//!     2 categorical  feature u32, n u32, n x u32 categories, left u32, right u32
//! checksum     u64 FNV-1a over every preceding byte
//! ```

use std::io::{Read, Write};
use std::path::Path;

use vrd_core::gbdt::{BoostedModel, DecisionTree, FeatureSchema, Node, Objective, ObjectiveKind, Split};

use crate::csvio::{create_file, open_file};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"VRDGBDT\0";
pub const FORMAT_VERSION: u32 = 1;

const TAG_LEAF: u8 = 0;
const TAG_NUMERIC: u8 = 1;
const TAG_CATEGORICAL: u8 = 2;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("model dimension exceeds u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_model(model: &BoostedModel) -> Vec<u8> {
    let mut e = Encoder(Vec::with_capacity(64 + model.trees().len() * 64));
    e.0.extend_from_slice(&MAGIC);
    e.u32(FORMAT_VERSION as usize);
    let schema = model.schema();
    e.u32(schema.n_features);
    e.u32(schema.categorical.len());
    for &c in &schema.categorical {
        e.u32(c);
    }
    let obj = model.objective();
    e.u8(match obj.kind {
        ObjectiveKind::CrossEntropy => 0,
        ObjectiveKind::Focal => 1,
    });
    e.f64(obj.gamma);
    e.f64(obj.alpha);
    e.f64(model.base_score());
    e.f64(model.learning_rate());
    e.u32(model.trees().len());
    for tree in model.trees() {
        e.u32(tree.nodes().len());
        for node in tree.nodes() {
            match node {
                Node::Leaf { value } => {
                    e.u8(TAG_LEAF);
                    e.f64(*value);
                }
                Node::Internal { split: Split::Numeric { feature, threshold }, left, right } => {
                    e.u8(TAG_NUMERIC);
                    e.u32(*feature);
                    e.f64(*threshold);
                    e.u32(*left as usize);
                    e.u32(*right as usize);
                }
                Node::Internal { split: Split::Categorical { feature, left: cats }, left, right } => {
                    e.u8(TAG_CATEGORICAL);
                    e.u32(*feature);
                    e.u32(cats.len());
                    for &c in cats {
                        e.u32(c as usize);
                    }
                    e.u32(*left as usize);
                    e.u32(*right as usize);
                }
            }
        }
    }
    let sum = fnv1a(&e.0);
    e.0.extend_from_slice(&sum.to_le_bytes());
    e.0
}

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Decoder<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> std::result::Result<usize, String> {
        self.u32().map(|v| v as usize)
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    /// Element count, bounded by the bytes left so corrupt counts cannot
    /// trigger huge allocations.
    fn count(&mut self, min_elem_size: usize) -> std::result::Result<usize, String> {
        let n = self.usize()?;
        if n.saturating_mul(min_elem_size) > self.bytes.len() - self.pos {
            return Err("truncated".into());
        }
        Ok(n)
    }
}

fn decode_body(d: &mut Decoder<'_>) -> std::result::Result<BoostedModel, String> {
    let n_features = d.usize()?;
    let n_cat = d.count(4)?;
    let mut categorical = Vec::with_capacity(n_cat);
    for _ in 0..n_cat {
        let c = d.usize()?;
        if c >= n_features || categorical.last().is_some_and(|&p| p >= c) {
            return Err(format!("bad categorical feature index {c}"));
        }
        categorical.push(c);
    }
    let kind = match d.u8()? {
        0 => ObjectiveKind::CrossEntropy,
        1 => ObjectiveKind::Focal,
        k => return Err(format!("unknown objective tag {k}")),
    };
    let objective = Objective { kind, gamma: d.f64()?, alpha: d.f64()? };
    objective.validate().map_err(|e| e.to_string())?;
    let base = d.f64()?;
    let lr = d.f64()?;
    if !base.is_finite() || !lr.is_finite() {
        return Err("non-finite base score or learning rate".into());
    }
    let mut model = BoostedModel::new(base, lr, FeatureSchema { n_features, categorical }, objective);
    let n_trees = d.count(4)?;
    for t in 0..n_trees {
        let n_nodes = d.count(9)?;
        if n_nodes == 0 {
            return Err(format!("tree {t} has no nodes"));
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let node = match d.u8()? {
                TAG_LEAF => Node::Leaf { value: d.f64()? },
                TAG_NUMERIC => {
                    let feature = d.usize()?;
                    let threshold = d.f64()?;
                    Node::Internal { split: Split::Numeric { feature, threshold }, left: d.u32()?, right: d.u32()? }
                }
                TAG_CATEGORICAL => {
                    let feature = d.usize()?;
                    let n = d.count(4)?;
                    let mut cats = Vec::with_capacity(n);
                    for _ in 0..n {
                        cats.push(d.u32()?);
                    }
                    if !cats.windows(2).all(|w| w[0] < w[1]) {
                        return Err(format!("tree {t}: categories not sorted"));
                    }
                    Node::Internal {
                        split: Split::Categorical { feature, left: cats },
                        left: d.u32()?,
                        right: d.u32()?,
                    }
                }
                tag => return Err(format!("tree {t}: unknown node tag {tag}")),
            };
            if let Node::Internal { split, .. } = &node {
                if split.feature() >= n_features {
                    return Err(format!("tree {t}: feature {} out of range", split.feature()));
                }
            }
            nodes.push(node);
        }
        let tree = DecisionTree::from_nodes(nodes);
        if !tree.is_well_formed() {
            return Err(format!("tree {t} is not a well-formed binary tree"));
        }
        model.push_tree(tree);
    }
    Ok(model)
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<BoostedModel> {
    let corrupt = |message: String| Error::CorruptModel { path: path.to_path_buf(), message };
    if bytes.len() < MAGIC.len() + 4 + 8 {
        return Err(corrupt("truncated".into()));
    }
    if bytes[..8] != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if found != FORMAT_VERSION {
        return Err(Error::ModelVersion { path: path.to_path_buf(), found, expected: FORMAT_VERSION });
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if fnv1a(body) != u64::from_le_bytes(sum.try_into().unwrap()) {
        return Err(corrupt("checksum mismatch".into()));
    }
    let mut d = Decoder { bytes: body, pos: 12 };
    let model = decode_body(&mut d).map_err(corrupt)?;
    if d.pos != body.len() {
        return Err(corrupt(format!("{} trailing bytes", body.len() - d.pos)));
    }
    Ok(model)
}

pub fn save_model(path: &Path, model: &BoostedModel) -> Result<()> {
    let mut w = create_file(path)?;
    w.write_all(&encode_model(model)).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<BoostedModel> {
    let mut bytes = Vec::new();
    open_file(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}
