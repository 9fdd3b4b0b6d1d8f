//! Best-first growth of a single tree on binned data.

use alloc::vec::Vec;

use super::binning::{BinStats, BinnedMatrix, FeatureBins};
use super::objective::HESSIAN_FLOOR;
use super::tree::{DecisionTree, Node, Split};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowParams {
    pub num_leaves: usize,
    pub min_samples_per_leaf: usize,
    pub min_sum_hessian: f64,
    pub lambda_l2: f64,
    /// Added to the Hessian when ordering categories by gradient ratio.
    pub cat_smooth: f64,
    /// Categorical features with at most this many present categories are
    /// split one category against the rest.
    pub max_cat_one_vs_rest: usize,
}

impl Default for GrowParams {
    fn default() -> Self {
        Self {
            num_leaves: 31,
            min_samples_per_leaf: 20,
            min_sum_hessian: 1e-3,
            lambda_l2: 0.0,
            cat_smooth: 10.0,
            max_cat_one_vs_rest: 4,
        }
    }
}

/// Record of one split, for inspecting growth decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEvent {
    /// Rows of every open leaf just before the split, in leaf order.
    pub leaf_rows: Vec<Vec<usize>>,
    pub chosen_leaf: usize,
    pub feature: usize,
    pub gain: f64,
}

#[derive(Debug, Clone)]
enum Rule {
    Numeric { bin: u32 },
    Categorical { left: Vec<u32> },
}

#[derive(Debug, Clone)]
struct Candidate {
    gain: f64,
    feature: usize,
    rule: Rule,
}

struct OpenLeaf {
    node: usize,
    rows: Vec<usize>,
    best: Option<Candidate>,
}

fn leaf_score(s: &BinStats, lambda: f64) -> f64 {
    s.grad * s.grad / (s.hess + lambda).max(HESSIAN_FLOOR)
}

fn leaf_value(s: &BinStats, lambda: f64) -> f64 {
    -s.grad / (s.hess + lambda).max(HESSIAN_FLOOR)
}

fn admissible(s: &BinStats, p: &GrowParams) -> bool {
    s.count >= p.min_samples_per_leaf.max(1) && s.hess >= p.min_sum_hessian
}

fn totals(rows: &[usize], grad: &[f64], hess: &[f64]) -> BinStats {
    let mut s = BinStats::default();
    for &r in rows {
        s.grad += grad[r];
        s.hess += hess[r];
        s.count += 1;
    }
    s
}

fn best_split(
    data: &BinnedMatrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    p: &GrowParams,
) -> Option<Candidate> {
    let total = totals(rows, grad, hess);
    if total.count < 2 * p.min_samples_per_leaf.max(1) {
        return None;
    }
    let parent = leaf_score(&total, p.lambda_l2);
    let mut best: Option<Candidate> = None;
    let mut consider = |gain: f64, feature: usize, rule: &dyn Fn() -> Rule| {
        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Candidate { gain, feature, rule: rule() });
        }
    };

    for &f in features {
        let hist = data.histogram(f, rows, grad, hess);
        match data.feature(f) {
            FeatureBins::Numeric { .. } => {
                let mut left = BinStats::default();
                for (b, bin) in hist.iter().enumerate().take(hist.len().saturating_sub(1)) {
                    left += *bin;
                    let right = total - left;
                    if !admissible(&left, p) || !admissible(&right, p) {
                        continue;
                    }
                    let gain = leaf_score(&left, p.lambda_l2) + leaf_score(&right, p.lambda_l2) - parent;
                    consider(gain, f, &|| Rule::Numeric { bin: b as u32 });
                }
            }
            FeatureBins::Categorical { .. } => {
                let mut present: Vec<(u32, BinStats)> =
                    hist.iter().enumerate().filter(|(_, s)| s.count > 0).map(|(c, s)| (c as u32, *s)).collect();
                if present.len() < 2 {
                    continue;
                }
                if present.len() <= p.max_cat_one_vs_rest {
                    for &(c, s) in &present {
                        let right = total - s;
                        if !admissible(&s, p) || !admissible(&right, p) {
                            continue;
                        }
                        let gain = leaf_score(&s, p.lambda_l2) + leaf_score(&right, p.lambda_l2) - parent;
                        consider(gain, f, &|| Rule::Categorical { left: alloc::vec![c] });
                    }
                } else {
                    let smooth = p.cat_smooth;
                    present.sort_by(|a, b| {
                        let ra = a.1.grad / (a.1.hess + smooth);
                        let rb = b.1.grad / (b.1.hess + smooth);
                        ra.total_cmp(&rb).then(a.0.cmp(&b.0))
                    });
                    let mut left = BinStats::default();
                    for k in 1..present.len() {
                        left += present[k - 1].1;
                        let right = total - left;
                        if !admissible(&left, p) || !admissible(&right, p) {
                            continue;
                        }
                        let gain = leaf_score(&left, p.lambda_l2) + leaf_score(&right, p.lambda_l2) - parent;
                        consider(gain, f, &|| {
                            let mut cats: Vec<u32> = present[..k].iter().map(|(c, _)| *c).collect();
                            cats.sort_unstable();
                            Rule::Categorical { left: cats }
                        });
                    }
                }
            }
        }
    }
    best
}

fn goes_left(data: &BinnedMatrix, row: usize, feature: usize, rule: &Rule) -> bool {
    let b = data.bin(row, feature);
    match rule {
        Rule::Numeric { bin } => b <= *bin,
        Rule::Categorical { left } => left.binary_search(&b).is_ok(),
    }
}

/// Grows one tree over `rows` using only `features`.
///
/// Open leaves are split in order of decreasing best gain until the leaf cap
/// is reached or no admissible split with positive gain remains. Ties go to
/// the earlier leaf, then the lower feature index, then the lower threshold.
pub fn grow_tree(
    data: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    features: &[usize],
    params: &GrowParams,
    mut trace: Option<&mut Vec<SplitEvent>>,
) -> DecisionTree {
    let mut nodes = alloc::vec![Node::Leaf { value: 0.0 }];
    let best = best_split(data, &rows, grad, hess, features, params);
    let mut open = alloc::vec![OpenLeaf { node: 0, rows, best }];

    while open.len() < params.num_leaves.max(1) {
        let mut pick: Option<usize> = None;
        for (i, leaf) in open.iter().enumerate() {
            if let Some(c) = &leaf.best {
                if pick.is_none_or(|j| c.gain > open[j].best.as_ref().map_or(f64::NEG_INFINITY, |b| b.gain)) {
                    pick = Some(i);
                }
            }
        }
        let Some(i) = pick else { break };
        let leaf = &mut open[i];
        let cand = leaf.best.take().expect("picked leaf has a candidate");

        if let Some(t) = trace.as_deref_mut() {
            t.push(SplitEvent {
                leaf_rows: open.iter().map(|l| l.rows.clone()).collect(),
                chosen_leaf: i,
                feature: cand.feature,
                gain: cand.gain,
            });
        }

        let leaf = &mut open[i];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            leaf.rows.iter().partition(|&&r| goes_left(data, r, cand.feature, &cand.rule));
        let split = match &cand.rule {
            Rule::Numeric { bin } => Split::Numeric {
                feature: cand.feature,
                threshold: data.feature(cand.feature).upper_edge(*bin as usize),
            },
            Rule::Categorical { left } => Split::Categorical { feature: cand.feature, left: left.clone() },
        };
        let left_node = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Internal { split, left: left_node as u32, right: left_node as u32 + 1 };

        let left_best = best_split(data, &left_rows, grad, hess, features, params);
        let right_best = best_split(data, &right_rows, grad, hess, features, params);
        open[i] = OpenLeaf { node: left_node, rows: left_rows, best: left_best };
        open.push(OpenLeaf { node: left_node + 1, rows: right_rows, best: right_best });
    }

    for leaf in &open {
        let s = totals(&leaf.rows, grad, hess);
        nodes[leaf.node] = Node::Leaf { value: leaf_value(&s, params.lambda_l2) };
    }
    DecisionTree::from_nodes(nodes)
}
