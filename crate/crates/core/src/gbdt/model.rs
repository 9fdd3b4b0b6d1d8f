use alloc::vec::Vec;

use super::objective::Objective;
use super::tree::DecisionTree;
use crate::error::{Error, Result};
use crate::math::logistic;
use crate::pairfeat::PairFeatureVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub n_features: usize,
    /// Sorted indices of categorical features.
    pub categorical: Vec<usize>,
}

/// Trained ensemble. `predict` is `logistic(base + lr * sum(tree outputs))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    base_score: f64,
    learning_rate: f64,
    schema: FeatureSchema,
    objective: Objective,
    trees: Vec<DecisionTree>,
}

impl BoostedModel {
    pub fn new(base_score: f64, learning_rate: f64, schema: FeatureSchema, objective: Objective) -> Self {
        Self { base_score, learning_rate, schema, objective, trees: Vec::new() }
    }

    pub fn push_tree(&mut self, tree: DecisionTree) {
        self.trees.push(tree);
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Log-odds before the logistic link.
    pub fn raw_score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.schema.n_features {
            return Err(Error::DimensionMismatch { expected: self.schema.n_features, got: row.len() });
        }
        let mut s = self.base_score;
        for t in &self.trees {
            s += self.learning_rate * t.predict(row);
        }
        Ok(s)
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        self.raw_score(row).map(logistic)
    }

    pub fn predict_pair(&self, x: &PairFeatureVector) -> Result<f64> {
        self.predict(&x.to_row())
    }
}
