//! Acceptance gate: one PASS/FAIL line per criterion, tolerances fixed here.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;

use common::{brute_force_eval, brute_force_top_k, random_detections, random_instance, rng, small_model};
use vrd::csvio;
use vrd_core::gbdt::{cross_entropy, focal_loss, objective_grad_hess, train, Dataset, Objective, TrainConfig};
use vrd_core::metrics::{evaluate, EvalConfig};
use vrd_core::scoring::{combine_confidence, generate_candidates, CandidateConfig};
use vrd_core::synth::default_vocabulary;

const FOCAL_TOL: f64 = 1e-12;
const FOCAL_BUDGET: Duration = Duration::from_secs(1);
const GRAD_TOL: f64 = 1e-6;
const HESS_TOL: f64 = 1e-4;
const DERIV_BUDGET: Duration = Duration::from_secs(5);
const METRIC_TOL: f64 = 1e-9;
const METRIC_CASES: usize = 500;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const TOPK_IMAGES: usize = 200;
const TOPK_MAX_DETS: usize = 25;
const COMBINE_TOL: f64 = 1e-12;
const COMBINE_CASES: usize = 100_000;
const LOSS_TOL: f64 = 1e-12;
const E2E_DEFAULT_MIN: f64 = 0.9;
const E2E_NOISELESS_MIN: f64 = 0.99;
const E2E_BUDGET: Duration = Duration::from_secs(60);
const E2E_SEED: &str = "42";

struct Gate {
    failed: usize,
}

impl Gate {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed += 1;
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn focal_exactness(g: &mut Gate) {
    let t = Instant::now();
    let ratio = focal_loss(0.9, true, 2.0, 0.25).unwrap() / focal_loss(0.9, true, 0.0, 0.25).unwrap();
    let ratio_err = (ratio - 0.01).abs();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p: f64 = r.random_range(1e-6..1.0 - 1e-6);
        let y = r.random_bool(0.5);
        let f = focal_loss(p, y, 0.0, 0.5).unwrap();
        worst = worst.max((f - 0.5 * cross_entropy(p, y).unwrap()).abs());
    }
    let el = t.elapsed();
    g.check(
        "focal_loss_exactness",
        ratio_err <= FOCAL_TOL && worst <= FOCAL_TOL && el < FOCAL_BUDGET,
        format!("ratio err {ratio_err:.2e}, half-CE err {worst:.2e} (tol {FOCAL_TOL:e}), {el:.2?}"),
    );
}

fn gradient_hessian(g: &mut Gate) {
    let t = Instant::now();
    let mut r = rng(2);
    let (mut g_worst, mut h_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let z: f64 = r.random_range(-4.0..4.0);
        let y = r.random_bool(0.5);
        let obj = if r.random_bool(0.25) {
            Objective::cross_entropy()
        } else {
            Objective::focal(r.random_range(0.0..3.0), r.random_range(0.05..0.95)).unwrap()
        };
        let (grad, hess) = objective_grad_hess(z, y, &obj);
        let l = |x: f64| obj.loss_from_logit(x, y);
        let hg = 1e-5;
        let fd_g = (l(z + hg) - l(z - hg)) / (2.0 * hg);
        // Five-point stencil on the analytic gradient.
        let gr = |x: f64| obj.grad_hess_raw(x, y).0;
        let hh = 1e-2;
        let fd_h = (-gr(z + 2.0 * hh) + 8.0 * gr(z + hh) - 8.0 * gr(z - hh) + gr(z - 2.0 * hh)) / (12.0 * hh);
        let raw_h = obj.grad_hess_raw(z, y).1;
        g_worst = g_worst.max(rel_err(grad, fd_g));
        h_worst = h_worst.max(rel_err(raw_h, fd_h));
        assert!(hess >= raw_h);
    }
    let el = t.elapsed();
    g.check(
        "gradient_hessian_check",
        g_worst < GRAD_TOL && h_worst < HESS_TOL && el < DERIV_BUDGET,
        format!("grad rel {g_worst:.2e} (< {GRAD_TOL:e}), hess rel {h_worst:.2e} (< {HESS_TOL:e}), {el:.2?}"),
    );
}

fn metric_oracle(g: &mut Gate) {
    let t = Instant::now();
    let vocab = default_vocabulary();
    let mut r = rng(3);
    let cfg = EvalConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..METRIC_CASES {
        let (preds, gts) = random_instance(&mut r, &vocab);
        let got = evaluate(&preds, &gts, &cfg).unwrap();
        let want = brute_force_eval(&preds, &gts, cfg.iou_threshold, cfg.recall_n, cfg.weights, false);
        for (a, b) in [
            (got.map_rel, want.map_rel),
            (got.recall_at_n, want.recall_at_n),
            (got.map_phrase, want.map_phrase),
            (got.final_score, want.final_score),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    let el = t.elapsed();
    g.check(
        "metric_oracle_equivalence",
        worst <= METRIC_TOL && el < ORACLE_BUDGET,
        format!("{METRIC_CASES} instances, max diff {worst:.2e} (tol {METRIC_TOL:e}), {el:.2?}"),
    );
}

fn top_k_oracle(g: &mut Gate) {
    let (model, vocab) = small_model(7);
    let t = Instant::now();
    let mut r = rng(4);
    let mut mismatches = 0;
    let mut candidates = 0;
    for _ in 0..TOPK_IMAGES {
        let dets = random_detections(&mut r, &vocab, TOPK_MAX_DETS);
        let cfg = CandidateConfig::default();
        let got = generate_candidates(&dets, &model, &vocab, &cfg).unwrap();
        let want = brute_force_top_k(&dets, &model, &vocab, cfg.max_boxes, cfg.top_k);
        candidates += want.len();
        let same = got.len() == want.len()
            && got.iter().zip(&want).all(|(a, b)| {
                (a.d1_index, a.d2_index, a.relation, a.c_c.to_bits()) == (b.d1, b.d2, b.relation, b.c_c.to_bits())
            });
        if !same {
            mismatches += 1;
        }
    }
    let el = t.elapsed();
    g.check(
        "top_k_oracle_equivalence",
        mismatches == 0 && el < ORACLE_BUDGET,
        format!("{TOPK_IMAGES} images, {candidates} candidates, {mismatches} mismatching images, {el:.2?}"),
    );
}

fn combination(g: &mut Gate) {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..COMBINE_CASES {
        let (f, c1, c2): (f64, f64, f64) = (r.random(), r.random(), r.random());
        let c = combine_confidence(f, c1, c2);
        worst = worst.max((c - f * (c1 * c2).sqrt()).abs());
        let (df, dc): (f64, f64) = (r.random_range(0.0..=1.0 - f), r.random_range(0.0..=1.0 - c1));
        monotone &= combine_confidence(f + df, c1, c2) >= c && combine_confidence(f, c1 + dc, c2) >= c;
        monotone &= combine_confidence(f, c1, c2 + r.random_range(0.0..=1.0 - c2)) >= c;
    }
    g.check(
        "combination_formula",
        worst <= COMBINE_TOL && monotone,
        format!("{COMBINE_CASES} triples, max err {worst:.2e} (tol {COMBINE_TOL:e}), monotone {monotone}"),
    );
}

fn gbdt_sanity(g: &mut Gate) {
    let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
    let ys: Vec<bool> = (0..100).map(|i| i >= 50).collect();
    let data = Dataset::from_rows(&xs, 1, vec![]).unwrap();
    let cfg = TrainConfig { num_rounds: 10, ..TrainConfig::default() };
    let (model, _) = train(&data, &ys, &cfg, &Objective::cross_entropy()).unwrap();
    let correct = xs.iter().zip(&ys).filter(|(x, &y)| (model.predict(x).unwrap() > 0.5) == y).count();
    let accuracy = correct as f64 / 100.0;

    let mut r = rng(6);
    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| r.random::<f64>()).collect()).collect();
    let labels: Vec<bool> = rows.iter().map(|x| (x[0] + 0.3 * x[1] > 0.6) ^ r.random_bool(0.1)).collect();
    let data = Dataset::from_rows(&rows, 4, vec![]).unwrap();
    let mut worst_increase = f64::NEG_INFINITY;
    for obj in [Objective::cross_entropy(), Objective::focal(2.0, 0.25).unwrap()] {
        let cfg =
            TrainConfig { feature_fraction: 1.0, bagging_fraction: 1.0, num_rounds: 100, ..TrainConfig::default() };
        let (_, report) = train(&data, &labels, &cfg, &obj).unwrap();
        for w in report.loss_history.windows(2) {
            worst_increase = worst_increase.max(w[1] - w[0]);
        }
    }
    g.check(
        "gbdt_training_sanity",
        accuracy == 1.0 && worst_increase <= LOSS_TOL,
        format!("separable accuracy {accuracy} in 10 rounds, max round-over-round loss change {worst_increase:.2e} (tol {LOSS_TOL:e})"),
    );
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["vrd"];
    full.extend_from_slice(args);
    let code = vrd::cli::run(full, &mut out, &mut err);
    if code != 0 {
        eprintln!("{}", String::from_utf8_lossy(&err));
    }
    (code, String::from_utf8(out).unwrap())
}

fn final_score(report: &str) -> f64 {
    report
        .lines()
        .find(|l| l.starts_with("map_rel="))
        .and_then(|l| l.split(' ').find_map(|kv| kv.strip_prefix("final_score=")))
        .and_then(|v| v.parse().ok())
        .unwrap_or(f64::NAN)
}

fn e2e(dir: &Path, threads: &str, extra: &[&str]) -> (f64, Duration) {
    let t = Instant::now();
    let mut args = vec!["e2e", "--seed", E2E_SEED, "--threads", threads, "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let (code, out) = run_cli(&args);
    let el = t.elapsed();
    if code != 0 {
        return (f64::NAN, el);
    }
    (final_score(&out), el)
}

fn end_to_end(g: &mut Gate, root: &Path) {
    let (score, el) = e2e(&root.join("default"), "1", &[]);
    g.check(
        "e2e_default_recovery",
        score >= E2E_DEFAULT_MIN && el < E2E_BUDGET,
        format!("final_score {score:.6} (>= {E2E_DEFAULT_MIN}), {el:.2?} single-threaded"),
    );
    let (score, el) = e2e(&root.join("noiseless"), "1", &["--noiseless"]);
    g.check(
        "e2e_noiseless_recovery",
        score >= E2E_NOISELESS_MIN && el < E2E_BUDGET,
        format!("final_score {score:.6} (>= {E2E_NOISELESS_MIN}), {el:.2?} single-threaded"),
    );
}

/// Every file below `dir`, keyed by relative path. Manifests lose their
/// wall-clock and thread-count fields, which legitimately differ.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            let mut bytes = fs::read(&p).unwrap();
            if rel.ends_with(".manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                let obj = v.as_object_mut().unwrap();
                obj.remove("duration_ms");
                obj.remove("threads");
                for key in ["inputs", "outputs"] {
                    for (_, path) in obj[key].as_object_mut().unwrap().iter_mut() {
                        let s = path.as_str().unwrap().replace(dir.to_str().unwrap(), "<dir>");
                        *path = serde_json::Value::String(s);
                    }
                }
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(rel, bytes);
        }
    }
    out
}

fn determinism(g: &mut Gate, root: &Path) {
    let runs = [("a", "1"), ("b", "1"), ("c", "8")];
    let mut snaps = Vec::new();
    for (name, threads) in runs {
        let dir = root.join(format!("det-{name}"));
        e2e(&dir, threads, &[]);
        snaps.push(snapshot(&dir));
    }
    let files = snaps[0].len();
    let same_repeat = snaps[0] == snaps[1];
    let same_threads = snaps[0] == snaps[2];
    let report = snaps[0].get("report.txt").cloned().unwrap_or_default();
    g.check(
        "determinism",
        files > 5 && same_repeat && same_threads && !report.is_empty(),
        format!("{files} files; repeat identical {same_repeat}; --threads 1 vs 8 identical {same_threads}"),
    );
}

fn vocabulary(g: &mut Gate) {
    let path = std::env::var("VRD_CHALLENGE_TRIPLETS")
        .unwrap_or_else(|_| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/challenge_vocabulary.csv").to_string());
    let counts = csvio::load_vocabulary(Path::new(&path))
        .map(|v| (v.is_len(), v.pair_len(), v.len(), v.num_classes(), v.num_relations()));
    let pass = matches!(counts, Ok((42, 287, 329, 62, 10)));
    g.check(
        "vocabulary_invariant",
        pass,
        format!("{counts:?} from {path} (want 42/287/329, 62 classes, 10 relations)"),
    );
}

fn main() {
    let mut gate = Gate { failed: 0 };
    let tmp = tempfile::tempdir().unwrap();
    focal_exactness(&mut gate);
    gradient_hessian(&mut gate);
    metric_oracle(&mut gate);
    top_k_oracle(&mut gate);
    combination(&mut gate);
    gbdt_sanity(&mut gate);
    end_to_end(&mut gate, tmp.path());
    determinism(&mut gate, tmp.path());
    vocabulary(&mut gate);
    if gate.failed > 0 {
        println!("acceptance: {} criteria failed", gate.failed);
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
