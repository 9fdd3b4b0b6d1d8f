//! Gradient-boosted decision trees for binary targets.
//!
//! Trees are grown leaf-wise (best-first) on quantile histograms, up to a
//! leaf cap. Leaves hold Newton steps in log-odds units; the model applies the
//! learning rate at prediction time.

mod binning;
mod grower;
mod model;
mod objective;
mod train;
mod tree;

pub use binning::{BinnedMatrix, FeatureBins, MAX_CATEGORIES};
pub use grower::{grow_tree, GrowParams, SplitEvent};
pub use model::{BoostedModel, FeatureSchema};
pub use objective::{cross_entropy, focal_loss, objective_grad_hess, Objective, ObjectiveKind, HESSIAN_FLOOR};
pub use train::{train, Dataset, TrainConfig, TrainReport, PRIOR_CLAMP};
pub use tree::{DecisionTree, Node, Split};
