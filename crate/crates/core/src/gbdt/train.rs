use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::binning::BinnedMatrix;
use super::grower::{grow_tree, GrowParams};
use super::model::{BoostedModel, FeatureSchema};
use super::objective::{objective_grad_hess, Objective};
use crate::error::{Error, Result};
use crate::math;
use crate::pairfeat::{PairFeatureVector, CATEGORICAL_FEATURES, NUM_FEATURES};
use crate::rng::stage_rng;

/// Bound on the prior log-odds used as the base score.
pub const PRIOR_CLAMP: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub num_leaves: usize,
    pub learning_rate: f64,
    pub feature_fraction: f64,
    pub bagging_fraction: f64,
    /// Redraw the row subsample every this many rounds; 0 disables bagging.
    pub bagging_freq: usize,
    pub num_rounds: usize,
    pub min_samples_per_leaf: usize,
    pub max_bins: usize,
    pub min_sum_hessian: f64,
    pub lambda_l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_leaves: 31,
            learning_rate: 0.05,
            feature_fraction: 0.9,
            bagging_fraction: 0.8,
            bagging_freq: 5,
            num_rounds: 100,
            min_samples_per_leaf: 20,
            max_bins: 255,
            min_sum_hessian: 1e-3,
            lambda_l2: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.num_leaves < 2 {
            return bad(format!("num_leaves must be >= 2, got {}", self.num_leaves));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must be in (0, 1], got {}", self.learning_rate));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return bad(format!("feature_fraction must be in (0, 1], got {}", self.feature_fraction));
        }
        if !(self.bagging_fraction > 0.0 && self.bagging_fraction <= 1.0) {
            return bad(format!("bagging_fraction must be in (0, 1], got {}", self.bagging_fraction));
        }
        if self.num_rounds < 1 {
            return bad(format!("num_rounds must be >= 1, got {}", self.num_rounds));
        }
        if self.max_bins < 2 {
            return bad(format!("max_bins must be >= 2, got {}", self.max_bins));
        }
        if !(self.min_sum_hessian >= 0.0) || !(self.lambda_l2 >= 0.0) {
            return bad(format!(
                "min_sum_hessian and lambda_l2 must be >= 0, got {} and {}",
                self.min_sum_hessian, self.lambda_l2
            ));
        }
        Ok(())
    }

    fn grow_params(&self) -> GrowParams {
        GrowParams {
            num_leaves: self.num_leaves,
            min_samples_per_leaf: self.min_samples_per_leaf,
            min_sum_hessian: self.min_sum_hessian,
            lambda_l2: self.lambda_l2,
            ..GrowParams::default()
        }
    }

    fn bagging_enabled(&self) -> bool {
        self.bagging_freq > 0 && self.bagging_fraction < 1.0
    }
}

/// Dense row-major feature matrix with a set of categorical columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n_features: usize,
    categorical: Vec<usize>,
}

impl Dataset {
    pub fn new(values: Vec<f64>, n_features: usize, mut categorical: Vec<usize>) -> Result<Self> {
        if n_features == 0 || !values.len().is_multiple_of(n_features) {
            return Err(Error::DimensionMismatch { expected: n_features, got: values.len() });
        }
        categorical.sort_unstable();
        categorical.dedup();
        if let Some(&c) = categorical.iter().find(|&&c| c >= n_features) {
            return Err(Error::InvalidConfig(format!("categorical index {c} >= {n_features}")));
        }
        Ok(Self { values, n_features, categorical })
    }

    pub fn from_rows(rows: &[Vec<f64>], n_features: usize, categorical: Vec<usize>) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for r in rows {
            if r.len() != n_features {
                return Err(Error::DimensionMismatch { expected: n_features, got: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(values, n_features, categorical)
    }

    pub fn from_pair_features(features: &[PairFeatureVector]) -> Self {
        let mut values = Vec::with_capacity(features.len() * NUM_FEATURES);
        for f in features {
            values.extend_from_slice(&f.to_row());
        }
        Self { values, n_features: NUM_FEATURES, categorical: CATEGORICAL_FEATURES.to_vec() }
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_features
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.values[i * self.n_features + f]
    }

    pub fn categorical(&self) -> &[usize] {
        &self.categorical
    }

    pub fn is_categorical(&self, f: usize) -> bool {
        self.categorical.binary_search(&f).is_ok()
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema { n_features: self.n_features, categorical: self.categorical.clone() }
    }
}

/// Diagnostics collected while training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Total training loss before the first tree and after every round.
    pub loss_history: Vec<f64>,
    /// Zero-based rounds on which a fresh bagging subsample was drawn.
    pub bagging_rounds: Vec<usize>,
    /// Set when all labels agree and only the prior was fitted.
    pub single_class: bool,
}

fn total_loss(obj: &Objective, scores: &[f64], labels: &[bool]) -> f64 {
    scores.iter().zip(labels).map(|(&s, &y)| obj.loss_from_logit(s, y)).sum()
}

pub fn train(
    data: &Dataset,
    labels: &[bool],
    config: &TrainConfig,
    objective: &Objective,
) -> Result<(BoostedModel, TrainReport)> {
    config.validate()?;
    objective.validate()?;
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }

    let positives = labels.iter().filter(|&&y| y).count();
    let base_score = if positives == 0 {
        -PRIOR_CLAMP
    } else if positives == n {
        PRIOR_CLAMP
    } else {
        math::ln(positives as f64 / (n - positives) as f64).clamp(-PRIOR_CLAMP, PRIOR_CLAMP)
    };
    let mut model = BoostedModel::new(base_score, config.learning_rate, data.schema(), *objective);
    let mut scores = alloc::vec![base_score; n];
    let mut report =
        TrainReport { loss_history: alloc::vec![total_loss(objective, &scores, labels)], ..Default::default() };
    if positives == 0 || positives == n {
        report.single_class = true;
        return Ok((model, report));
    }

    let binned = BinnedMatrix::build(data, config.max_bins)?;
    let params = config.grow_params();
    let mut bag_rng = stage_rng(config.seed, "gbdt/bagging");
    let mut feature_rng = stage_rng(config.seed, "gbdt/features");
    let bag_size = (math::round(config.bagging_fraction * n as f64) as usize).clamp(1, n);
    let d = data.n_features();
    let tree_features = (math::round(config.feature_fraction * d as f64) as usize).clamp(1, d);

    let mut bag: Vec<usize> = (0..n).collect();
    let mut grad = alloc::vec![0.0; n];
    let mut hess = alloc::vec![0.0; n];

    for round in 0..config.num_rounds {
        if config.bagging_enabled() && round % config.bagging_freq == 0 {
            bag = index::sample(&mut bag_rng, n, bag_size).into_vec();
            bag.sort_unstable();
            report.bagging_rounds.push(round);
        }
        let features: Vec<usize> = if tree_features < d {
            let mut f = index::sample(&mut feature_rng, d, tree_features).into_vec();
            f.sort_unstable();
            f
        } else {
            // Keep the stream aligned whether or not subsampling is active.
            let _ = feature_rng.random::<u32>();
            (0..d).collect()
        };

        for i in 0..n {
            let (g, h) = objective_grad_hess(scores[i], labels[i], objective);
            grad[i] = g;
            hess[i] = h;
        }
        let tree = grow_tree(&binned, &grad, &hess, bag.clone(), &features, &params, None);
        for (i, s) in scores.iter_mut().enumerate() {
            *s += config.learning_rate * tree.predict(data.row(i));
        }
        model.push_tree(tree);
        report.loss_history.push(total_loss(objective, &scores, labels));
    }
    Ok((model, report))
}
