//! CSV readers and writers for vocabularies, detections and relationships.
//!
//! Columns are located by header name, so reordered files are accepted.
//! Scores are written with six decimals; coordinates use the shortest
//! representation that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use vrd_core::vocab::LabelResolver;
use vrd_core::{BBox, Detection, GroundTruthRelation, RelationshipPrediction, Triplet, TripletVocabulary};

use crate::error::{Error, Result};

pub const VOCAB_HEADER: [&str; 3] = ["LabelName1", "RelationshipLabel", "LabelName2"];
pub const DETECTION_HEADER: [&str; 7] = ["ImageID", "LabelName", "Score", "XMin", "XMax", "YMin", "YMax"];
pub const RELATION_HEADER: [&str; 13] = [
    "ImageID",
    "Score",
    "LabelName1",
    "XMin1",
    "XMax1",
    "YMin1",
    "YMax1",
    "RelationshipLabel",
    "LabelName2",
    "XMin2",
    "XMax2",
    "YMin2",
    "YMax2",
];

/// What to do with a row that fails validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowPolicy {
    #[default]
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: Vec<SkippedRow>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Row { path: path.to_path_buf(), line, message: format!("{other:?}") },
    }
}

fn columns<R: Read>(rdr: &mut csv::Reader<R>, path: &Path, names: &[&str]) -> Result<Vec<usize>> {
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    names
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}') == *name)
                .ok_or_else(|| Error::Format { path: path.to_path_buf(), message: format!("missing column {name:?}") })
        })
        .collect()
}

/// Reads each data row through `row`, applying `policy` to per-row failures.
fn read_rows<R, T, F>(input: R, path: &Path, names: &[&str], policy: RowPolicy, mut row: F) -> Result<Parsed<T>>
where
    R: Read,
    F: FnMut(&[&str]) -> std::result::Result<T, String>,
{
    let mut rdr = reader(input);
    let cols = columns(&mut rdr, path, names)?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<&str> = cols.iter().map(|&c| rec.get(c).unwrap_or("")).collect();
        match row(&fields) {
            Ok(v) => records.push(v),
            Err(message) => match policy {
                RowPolicy::Fail => return Err(Error::Row { path: path.to_path_buf(), line, message }),
                RowPolicy::Skip => skipped.push(SkippedRow { line, message }),
            },
        }
    }
    Ok(Parsed { records, skipped })
}

fn number(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field.parse().map_err(|_| format!("{name}: not a number: {field:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name}: not finite: {field:?}"))
    }
}

fn bbox(fields: &[&str], names: &[&str]) -> std::result::Result<BBox, String> {
    let mut c = [0.0; 4];
    for k in 0..4 {
        c[k] = number(fields[k], names[k])?;
    }
    BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| e.to_string())
}

fn image_id(field: &str) -> std::result::Result<String, String> {
    if field.is_empty() {
        Err("empty ImageID".into())
    } else {
        Ok(field.to_string())
    }
}

pub fn read_vocabulary<R: Read>(input: R, path: &Path) -> Result<TripletVocabulary> {
    let mut vocab = TripletVocabulary::new();
    read_rows(input, path, &VOCAB_HEADER, RowPolicy::Fail, |f| {
        if f.iter().any(|s| s.is_empty()) {
            return Err("empty label".to_string());
        }
        vocab.insert(f[0], f[1], f[2]).map(|_| ()).map_err(|e| e.to_string())
    })?;
    if vocab.is_empty() {
        return Err(Error::Format { path: path.to_path_buf(), message: "vocabulary has no triplets".into() });
    }
    Ok(vocab)
}

pub fn load_vocabulary(path: &Path) -> Result<TripletVocabulary> {
    read_vocabulary(open(path)?, path)
}

pub fn read_detections<R: Read, L: LabelResolver>(
    input: R,
    path: &Path,
    labels: &L,
    policy: RowPolicy,
) -> Result<Parsed<Detection>> {
    read_rows(input, path, &DETECTION_HEADER, policy, |f| {
        let image = image_id(f[0])?;
        let label = labels.resolve(f[1]).ok_or_else(|| format!("unknown label {:?}", f[1]))?;
        let score = number(f[2], "Score")?;
        let b = bbox(&f[3..7], &DETECTION_HEADER[3..7])?;
        Detection::new(image, label, score, b).map_err(|e| e.to_string())
    })
}

pub fn parse_detections<L: LabelResolver>(path: &Path, labels: &L, policy: RowPolicy) -> Result<Parsed<Detection>> {
    read_detections(open(path)?, path, labels, policy)
}

fn relation_row(
    f: &[&str],
    vocab: &TripletVocabulary,
) -> std::result::Result<(Triplet, RelationshipPrediction), String> {
    let image = image_id(f[0])?;
    let score = number(f[1], "Score")?;
    let triplet = vocab.lookup(f[2], f[7], f[8]).map_err(|e| e.to_string())?;
    let b1 = bbox(&f[3..7], &RELATION_HEADER[3..7])?;
    // Attribute rows may leave the second box empty.
    let b2 = if vocab.is_attribute(&triplet) && f[9..13].iter().all(|s| s.is_empty()) {
        b1
    } else {
        bbox(&f[9..13], &RELATION_HEADER[9..13])?
    };
    let p = RelationshipPrediction::new(vocab, image, triplet, b1, b2, score).map_err(|e| e.to_string())?;
    Ok((triplet, p))
}

pub fn read_predictions<R: Read>(
    input: R,
    path: &Path,
    vocab: &TripletVocabulary,
    policy: RowPolicy,
) -> Result<Parsed<RelationshipPrediction>> {
    read_rows(input, path, &RELATION_HEADER, policy, |f| relation_row(f, vocab).map(|(_, p)| p))
}

pub fn parse_predictions(
    path: &Path,
    vocab: &TripletVocabulary,
    policy: RowPolicy,
) -> Result<Parsed<RelationshipPrediction>> {
    read_predictions(open(path)?, path, vocab, policy)
}

/// Ground truth shares the prediction schema; the score column is ignored.
pub fn read_ground_truth<R: Read>(
    input: R,
    path: &Path,
    vocab: &TripletVocabulary,
    policy: RowPolicy,
) -> Result<Parsed<GroundTruthRelation>> {
    read_rows(input, path, &RELATION_HEADER, policy, |f| relation_row(f, vocab).map(|(_, p)| p.to_ground_truth()))
}

pub fn parse_ground_truth(
    path: &Path,
    vocab: &TripletVocabulary,
    policy: RowPolicy,
) -> Result<Parsed<GroundTruthRelation>> {
    read_ground_truth(open(path)?, path, vocab, policy)
}

/// Six decimals, round-half-even on the binary value.
pub fn format_score(score: f64) -> String {
    format!("{score:.6}")
}

fn coords(b: &BBox) -> [String; 4] {
    b.coords().map(|c| format!("{c}"))
}

fn relation_record(
    vocab: &TripletVocabulary,
    image: &str,
    score: &str,
    t: &Triplet,
    b1: &BBox,
    b2: &BBox,
) -> Vec<String> {
    let [a, b, c, d] = coords(b1);
    let [e, f, g, h] = coords(b2);
    vec![
        image.to_string(),
        score.to_string(),
        vocab.class_name(t.label1).to_string(),
        a,
        b,
        c,
        d,
        vocab.relation_name(t.relation).to_string(),
        vocab.class_name(t.label2).to_string(),
        e,
        f,
        g,
        h,
    ]
}

fn io_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| csv_error(path, e)
}

pub fn write_vocabulary_to<W: Write>(out: W, path: &Path, vocab: &TripletVocabulary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VOCAB_HEADER).map_err(io_err(path))?;
    for t in vocab.triplets() {
        w.write_record([vocab.class_name(t.label1), vocab.relation_name(t.relation), vocab.class_name(t.label2)])
            .map_err(io_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_vocabulary(path: &Path, vocab: &TripletVocabulary) -> Result<()> {
    write_vocabulary_to(create(path)?, path, vocab)
}

pub fn write_detections_to<W: Write, L: LabelResolver>(
    out: W,
    path: &Path,
    labels: &L,
    dets: &[Detection],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DETECTION_HEADER).map_err(io_err(path))?;
    for d in dets {
        let name =
            labels.name_of(d.label).ok_or_else(|| Error::Internal(format!("class {} has no name", d.label.0)))?;
        let [a, b, c, e] = coords(&d.bbox);
        w.write_record([d.image_id.as_str(), name, &format_score(d.score), &a, &b, &c, &e]).map_err(io_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_detections<L: LabelResolver>(path: &Path, labels: &L, dets: &[Detection]) -> Result<()> {
    write_detections_to(create(path)?, path, labels, dets)
}

pub fn write_predictions_to<W: Write>(
    out: W,
    path: &Path,
    vocab: &TripletVocabulary,
    preds: &[RelationshipPrediction],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RELATION_HEADER).map_err(io_err(path))?;
    for p in preds {
        let rec = relation_record(vocab, &p.image_id, &format_score(p.score), &p.triplet(), &p.box1, &p.box2);
        w.write_record(&rec).map_err(io_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_predictions(path: &Path, vocab: &TripletVocabulary, preds: &[RelationshipPrediction]) -> Result<()> {
    write_predictions_to(create(path)?, path, vocab, preds)
}

pub fn write_ground_truth_to<W: Write>(
    out: W,
    path: &Path,
    vocab: &TripletVocabulary,
    gts: &[GroundTruthRelation],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RELATION_HEADER).map_err(io_err(path))?;
    for g in gts {
        let rec = relation_record(vocab, &g.image_id, "1", &g.triplet(), &g.box1, &g.box2);
        w.write_record(&rec).map_err(io_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ground_truth(path: &Path, vocab: &TripletVocabulary, gts: &[GroundTruthRelation]) -> Result<()> {
    write_ground_truth_to(create(path)?, path, vocab, gts)
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<File>> {
    create(path)
}

pub(crate) fn open_file(path: &Path) -> Result<File> {
    open(path)
}
