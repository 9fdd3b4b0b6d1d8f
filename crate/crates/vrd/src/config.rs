//! TOML configuration file. Command-line flags override file values, which
//! override built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveName {
    Ce,
    Focal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingName {
    Relation,
    Triplet,
}

/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub skip_invalid: Option<bool>,
    pub vocab: Option<PathBuf>,

    pub images: Option<usize>,
    pub train_images: Option<usize>,
    pub test_images: Option<usize>,
    pub noiseless: Option<bool>,
    pub rule_noise: Option<f64>,
    pub box_jitter: Option<f64>,
    pub attribute_prob: Option<f64>,

    pub negatives_per_positive: Option<f64>,
    pub iou_threshold: Option<f64>,
    pub max_boxes: Option<usize>,

    pub objective: Option<ObjectiveName>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub num_leaves: Option<usize>,
    pub learning_rate: Option<f64>,
    pub feature_fraction: Option<f64>,
    pub bagging_fraction: Option<f64>,
    pub bagging_freq: Option<usize>,
    pub num_rounds: Option<usize>,
    pub min_samples_per_leaf: Option<usize>,
    pub max_bins: Option<usize>,

    pub top_k: Option<usize>,
    pub recall_n: Option<usize>,
    pub grouping: Option<GroupingName>,
}

impl FileConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Flag, then file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
