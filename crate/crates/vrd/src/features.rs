//! Feature-matrix CSV: `ImageID,Label` followed by one column per feature.

use std::io::{Read, Write};
use std::path::Path;

use vrd_core::gbdt::Dataset;
use vrd_core::pairfeat::{CATEGORICAL_FEATURES, FEATURE_NAMES, NUM_FEATURES};
use vrd_core::training::LabeledPairs;

use crate::csvio::{create_file, open_file};
use crate::error::{Error, Result};

/// A training matrix read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub image_ids: Vec<String>,
    pub rows: Vec<[f64; NUM_FEATURES]>,
    pub labels: Vec<bool>,
}

impl FeatureTable {
    pub fn from_pairs(pairs: &LabeledPairs) -> Self {
        Self {
            image_ids: pairs.image_ids.clone(),
            rows: pairs.features.iter().map(|f| f.to_row()).collect(),
            labels: pairs.labels.clone(),
        }
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let values = self.rows.iter().flatten().copied().collect();
        Ok(Dataset::new(values, NUM_FEATURES, CATEGORICAL_FEATURES.to_vec())?)
    }
}

fn header() -> Vec<&'static str> {
    let mut h = vec!["ImageID", "Label"];
    h.extend(FEATURE_NAMES);
    h
}

pub fn write_features_to<W: Write>(out: W, path: &Path, table: &FeatureTable) -> Result<()> {
    let err = |e: csv::Error| Error::Format { path: path.to_path_buf(), message: e.to_string() };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header()).map_err(err)?;
    let mut rec: Vec<String> = Vec::with_capacity(NUM_FEATURES + 2);
    for ((id, row), &y) in table.image_ids.iter().zip(&table.rows).zip(&table.labels) {
        rec.clear();
        rec.push(id.clone());
        rec.push(if y { "1" } else { "0" }.to_string());
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    write_features_to(create_file(path)?, path, table)
}

pub fn read_features<R: Read>(input: R, path: &Path) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let row_err = |line: u64, message: String| Error::Row { path: path.to_path_buf(), line, message };
    let got = rdr.headers().map_err(|e| row_err(1, e.to_string()))?.clone();
    if got.iter().collect::<Vec<_>>() != header() {
        return Err(Error::Format { path: path.to_path_buf(), message: "unexpected feature header".into() });
    }
    let mut table = FeatureTable { image_ids: Vec::new(), rows: Vec::new(), labels: Vec::new() };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| row_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let label = match &rec[1] {
            "1" => true,
            "0" => false,
            other => return Err(row_err(line, format!("Label must be 0 or 1, got {other:?}"))),
        };
        let mut row = [0.0; NUM_FEATURES];
        for (k, slot) in row.iter_mut().enumerate() {
            let field = &rec[k + 2];
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| row_err(line, format!("{}: bad value {field:?}", FEATURE_NAMES[k])))?;
        }
        table.image_ids.push(rec[0].to_string());
        table.rows.push(row);
        table.labels.push(label);
    }
    Ok(table)
}

pub fn load_features(path: &Path) -> Result<FeatureTable> {
    read_features(open_file(path)?, path)
}
