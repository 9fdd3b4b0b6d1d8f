use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vrd_core::gbdt::{
    grow_tree, objective_grad_hess, train, BinnedMatrix, Dataset, GrowParams, Node, Objective, Split, SplitEvent,
    TrainConfig, PRIOR_CLAMP,
};
use vrd_core::math::logistic;

fn separable(n: usize) -> (Dataset, Vec<bool>) {
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) / n as f64).collect();
    let labels = xs.iter().map(|&x| x > 0.0).collect();
    (Dataset::new(xs, 1, vec![]).unwrap(), labels)
}

fn random_dataset(seed: u64, n: usize, d: usize) -> (Dataset, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let signal = row[0] + 0.5 * row[1] - 0.75 + 0.3 * (rng.random::<f64>() - 0.5);
        labels.push(signal > 0.0);
        values.extend(row);
    }
    (Dataset::new(values, d, vec![]).unwrap(), labels)
}

#[test]
fn separable_data_is_fit_within_ten_rounds() {
    let (data, labels) = separable(100);
    let cfg = TrainConfig { num_rounds: 10, ..TrainConfig::default() };
    let (model, report) = train(&data, &labels, &cfg, &Objective::cross_entropy()).unwrap();
    assert!(model.trees().len() <= 10);
    assert!(!report.single_class);
    let correct = (0..data.n_rows()).filter(|&i| (model.predict(data.row(i)).unwrap() > 0.5) == labels[i]).count();
    assert_eq!(correct, 100);
    assert!(model.predict(&[0.3]).unwrap() > 0.5);
    assert!(model.predict(&[-0.3]).unwrap() < 0.5);
}

#[test]
fn single_class_returns_prior_only() {
    let (data, _) = separable(30);
    let ones = vec![true; 30];
    let (model, report) = train(&data, &ones, &TrainConfig::default(), &Objective::cross_entropy()).unwrap();
    assert!(report.single_class);
    assert!(model.trees().is_empty());
    assert_eq!(model.base_score(), PRIOR_CLAMP);
    let p = model.predict(&[0.0]).unwrap();
    assert!(p < 1.0 && p > 1.0 - 1e-6);

    let zeros = vec![false; 30];
    let (model, _) = train(&data, &zeros, &TrainConfig::default(), &Objective::cross_entropy()).unwrap();
    assert_eq!(model.base_score(), -PRIOR_CLAMP);
}

#[test]
fn empty_dataset_is_an_error() {
    let data = Dataset::new(vec![], 3, vec![]).unwrap();
    assert!(train(&data, &[], &TrainConfig::default(), &Objective::cross_entropy()).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let (data, labels) = separable(40);
    for cfg in [
        TrainConfig { num_leaves: 1, ..TrainConfig::default() },
        TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        TrainConfig { feature_fraction: 1.5, ..TrainConfig::default() },
        TrainConfig { bagging_fraction: 0.0, ..TrainConfig::default() },
        TrainConfig { num_rounds: 0, ..TrainConfig::default() },
    ] {
        assert!(train(&data, &labels, &cfg, &Objective::cross_entropy()).is_err(), "{cfg:?}");
    }
}

#[test]
fn bagging_redraws_every_freq_rounds() {
    let (data, labels) = random_dataset(1, 200, 4);
    let cfg = TrainConfig { num_rounds: 23, bagging_freq: 5, bagging_fraction: 0.8, ..TrainConfig::default() };
    let (_, report) = train(&data, &labels, &cfg, &Objective::cross_entropy()).unwrap();
    assert_eq!(report.bagging_rounds, vec![0, 5, 10, 15, 20]);

    let off = TrainConfig { bagging_freq: 0, ..cfg.clone() };
    assert!(train(&data, &labels, &off, &Objective::cross_entropy()).unwrap().1.bagging_rounds.is_empty());
    let full = TrainConfig { bagging_fraction: 1.0, ..cfg };
    assert!(train(&data, &labels, &full, &Objective::cross_entropy()).unwrap().1.bagging_rounds.is_empty());
}

#[test]
fn loss_is_monotone_without_subsampling() {
    let (data, labels) = random_dataset(7, 300, 5);
    let cfg = TrainConfig { feature_fraction: 1.0, bagging_fraction: 1.0, num_rounds: 100, ..TrainConfig::default() };
    for obj in [Objective::cross_entropy(), Objective::focal(2.0, 0.25).unwrap()] {
        let (_, report) = train(&data, &labels, &cfg, &obj).unwrap();
        assert_eq!(report.loss_history.len(), 101);
        for w in report.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?} {:?}", obj.kind, w);
        }
    }
}

#[test]
fn training_is_deterministic_under_seed() {
    let (data, labels) = random_dataset(3, 250, 6);
    let cfg = TrainConfig { num_rounds: 30, seed: 99, ..TrainConfig::default() };
    let a = train(&data, &labels, &cfg, &Objective::cross_entropy()).unwrap().0;
    let b = train(&data, &labels, &cfg, &Objective::cross_entropy()).unwrap().0;
    assert_eq!(a, b);
    let c = train(&data, &labels, &TrainConfig { seed: 100, ..cfg }, &Objective::cross_entropy()).unwrap().0;
    assert_ne!(a, c);
}

#[test]
fn trees_respect_structure_invariants() {
    let (data, labels) = random_dataset(5, 400, 3);
    for leaves in [2, 7, 31] {
        let cfg = TrainConfig { num_leaves: leaves, num_rounds: 10, min_samples_per_leaf: 5, ..TrainConfig::default() };
        let (model, _) = train(&data, &labels, &cfg, &Objective::cross_entropy()).unwrap();
        for t in model.trees() {
            assert!(t.is_well_formed());
            assert!(t.num_leaves() <= leaves);
            assert!(t.nodes().iter().all(|n| !matches!(n, Node::Internal { split: Split::Categorical { .. }, .. })));
        }
        for i in 0..data.n_rows() {
            let p = model.predict(data.row(i)).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }
}

#[test]
fn categorical_interaction_is_learned() {
    // Label depends on category: positive iff (cat is odd) xor (x > 0.5).
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..600 {
        let cat = rng.random_range(0..8u32);
        let x = rng.random::<f64>();
        values.extend([f64::from(cat), x]);
        labels.push((cat % 2 == 1) ^ (x > 0.5));
    }
    let data = Dataset::new(values, 2, vec![0]).unwrap();
    let cfg = TrainConfig { num_rounds: 60, learning_rate: 0.2, ..TrainConfig::default() };
    let (model, _) = train(&data, &labels, &cfg, &Objective::cross_entropy()).unwrap();
    let correct = (0..data.n_rows()).filter(|&i| (model.predict(data.row(i)).unwrap() > 0.5) == labels[i]).count();
    assert!(correct as f64 / 600.0 > 0.95, "{correct}");
    let uses_categorical = model
        .trees()
        .iter()
        .flat_map(|t| t.nodes())
        .any(|n| matches!(n, Node::Internal { split: Split::Categorical { feature: 0, .. }, .. }));
    assert!(uses_categorical);
    // Unseen category takes the right branch instead of failing.
    assert!(model.predict(&[42.0, 0.3]).is_ok());
}

/// Best admissible gain over all leaves and all (feature, threshold) pairs,
/// recomputed from raw values.
fn exhaustive_best_gain(data: &Dataset, grad: &[f64], hess: &[f64], leaves: &[Vec<usize>], p: &GrowParams) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + p.lambda_l2).max(1e-16);
    let mut best = f64::NEG_INFINITY;
    for rows in leaves {
        let (gt, ht): (f64, f64) = rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + grad[r], h + hess[r]));
        for f in 0..data.n_features() {
            let mut values: Vec<f64> = (0..data.n_rows()).map(|r| data.value(r, f)).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
                for &r in rows {
                    if data.value(r, f) <= thr {
                        gl += grad[r];
                        hl += hess[r];
                        nl += 1;
                    }
                }
                let nr = rows.len() - nl;
                let (gr, hr) = (gt - gl, ht - hl);
                if nl < p.min_samples_per_leaf
                    || nr < p.min_samples_per_leaf
                    || hl < p.min_sum_hessian
                    || hr < p.min_sum_hessian
                {
                    continue;
                }
                best = best.max(score(gl, hl) + score(gr, hr) - score(gt, ht));
            }
        }
    }
    best
}

#[test]
fn leaf_wise_growth_picks_the_globally_best_split() {
    for seed in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let d = 3;
        // Coarse grid values so every distinct value gets its own bin.
        let values: Vec<f64> = (0..n * d).map(|_| f64::from(rng.random_range(0..12u32)) / 12.0).collect();
        let labels: Vec<bool> =
            (0..n).map(|i| values[i * d] + 0.4 * values[i * d + 1] + 0.2 * rng.random::<f64>() > 0.75).collect();
        let data = Dataset::new(values, d, vec![]).unwrap();
        let obj = if seed % 2 == 0 { Objective::cross_entropy() } else { Objective::focal(2.0, 0.25).unwrap() };
        let base = 0.3 * (seed as f64 - 4.0);
        let (grad, hess): (Vec<f64>, Vec<f64>) = labels.iter().map(|&y| objective_grad_hess(base, y, &obj)).unzip();
        let binned = BinnedMatrix::build(&data, 255).unwrap();
        let params = GrowParams { num_leaves: 8, min_samples_per_leaf: 3, ..GrowParams::default() };
        let mut trace: Vec<SplitEvent> = Vec::new();
        let tree = grow_tree(&binned, &grad, &hess, (0..n).collect(), &[0, 1, 2], &params, Some(&mut trace));
        assert!(!trace.is_empty());
        assert_eq!(tree.num_leaves(), trace.len() + 1);
        for ev in &trace {
            let oracle = exhaustive_best_gain(&data, &grad, &hess, &ev.leaf_rows, &params);
            assert!((ev.gain - oracle).abs() <= 1e-9 * oracle.abs().max(1.0), "seed {seed}: {} vs {oracle}", ev.gain);
        }
    }
}

#[test]
fn predictions_are_strictly_inside_unit_interval() {
    let (data, labels) = separable(100);
    let cfg = TrainConfig { num_rounds: 100, learning_rate: 1.0, min_samples_per_leaf: 1, ..TrainConfig::default() };
    let (model, _) = train(&data, &labels, &cfg, &Objective::cross_entropy()).unwrap();
    for x in [-1e6, -0.5, 0.0, 0.5, 1e6] {
        let p = model.predict(&[x]).unwrap();
        assert!(p > 0.0 && p < 1.0, "{x} -> {p}");
        assert_eq!(p, logistic(model.raw_score(&[x]).unwrap()));
    }
}
