//! The `vrd` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vrd_core::gbdt::{self, BoostedModel, Objective, TrainConfig};
use vrd_core::metrics::{ApGrouping, EvalConfig, EvalReport, GroupKey};
use vrd_core::rng::derive_seed;
use vrd_core::scoring::{CandidateConfig, IsTripletClassMap};
use vrd_core::synth::{self, SynthConfig, SynthWorld};
use vrd_core::training::{build_training_set, SamplingConfig};
use vrd_core::TripletVocabulary;

use crate::config::{pick, FileConfig, GroupingName, ObjectiveName};
use crate::csvio::{self, RowPolicy};
use crate::error::{Error, ErrorKind, Result};
use crate::features::{self, FeatureTable};
use crate::manifest::{write_manifest, RunManifest};
use crate::model_io;
use crate::parallel;

#[derive(Debug, Parser)]
#[command(name = "vrd", version, about = "Visual relationship detection from object detections")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-image work.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with default option values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Skip malformed input rows instead of failing.
    #[arg(long, global = true)]
    pub skip_invalid: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world with planted relationship rules.
    GenSynth(GenSynthArgs),
    /// Build the labeled pair-feature matrix used for training.
    ExtractFeatures(ExtractArgs),
    /// Fit the boosted-tree relationship classifier.
    Train(TrainArgs),
    /// Produce ranked relationship predictions.
    Score(ScoreArgs),
    /// Compute mAP_rel, Recall@N, mAP_phrase and the weighted score.
    Evaluate(EvaluateArgs),
    /// Generate, train, score and evaluate in one run.
    E2e(E2eArgs),
}

#[derive(Debug, Args, Default)]
pub struct SynthKnobs {
    /// Remove label and detector noise.
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long)]
    pub rule_noise: Option<f64>,
    #[arg(long)]
    pub box_jitter: Option<f64>,
    #[arg(long)]
    pub attribute_prob: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct TrainKnobs {
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveName>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub num_leaves: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub feature_fraction: Option<f64>,
    #[arg(long)]
    pub bagging_fraction: Option<f64>,
    #[arg(long)]
    pub bagging_freq: Option<usize>,
    #[arg(long)]
    pub num_rounds: Option<usize>,
    #[arg(long)]
    pub min_samples_per_leaf: Option<usize>,
    #[arg(long)]
    pub max_bins: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct EvalKnobs {
    #[arg(long)]
    pub recall_n: Option<usize>,
    #[arg(long, value_enum)]
    pub grouping: Option<GroupingName>,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub images: Option<usize>,
    /// Vocabulary CSV; pair relations must have planted rules.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthKnobs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub negatives_per_positive: Option<f64>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long)]
    pub max_boxes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainKnobs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub detections: PathBuf,
    /// Attribute detections with classes named `label1|is|attribute`.
    #[arg(long)]
    pub is_detections: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub max_boxes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[command(flatten)]
    pub eval: EvalKnobs,
}

#[derive(Debug, Args)]
pub struct E2eArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub train_images: Option<usize>,
    #[arg(long)]
    pub test_images: Option<usize>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthKnobs,
    #[arg(long)]
    pub negatives_per_positive: Option<f64>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long)]
    pub max_boxes: Option<usize>,
    #[command(flatten)]
    pub train: TrainKnobs,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[command(flatten)]
    pub eval: EvalKnobs,
}

struct Ctx {
    file: FileConfig,
    seed: u64,
    threads: usize,
    policy: RowPolicy,
    started: Instant,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let default_threads = std::thread::available_parallelism().map_or(1, usize::from);
        let threads = pick(cli.threads, file.threads, default_threads);
        if threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let skip = cli.skip_invalid || file.skip_invalid.unwrap_or(false);
        Ok(Self {
            seed: pick(cli.seed, file.seed, 0),
            threads,
            policy: if skip { RowPolicy::Skip } else { RowPolicy::Fail },
            file,
            started: Instant::now(),
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        parallel::thread_pool(self.threads)
    }

    fn manifest(&self, subcommand: &str, config: serde_json::Value) -> RunManifest {
        RunManifest::new(subcommand, self.seed, self.threads, config)
    }

    fn finish(&self, output: &Path, mut m: RunManifest) -> Result<()> {
        m.duration_ms = self.started.elapsed().as_millis();
        write_manifest(output, &m).map(|_| ())
    }

    fn vocabulary(&self, flag: &Option<PathBuf>) -> Result<(TripletVocabulary, Option<PathBuf>)> {
        match flag.clone().or_else(|| self.file.vocab.clone()) {
            Some(p) => Ok((csvio::load_vocabulary(&p)?, Some(p))),
            None => Ok((synth::default_vocabulary(), None)),
        }
    }

    fn synth_config(
        &self,
        k: &SynthKnobs,
        vocabulary: TripletVocabulary,
        num_images: usize,
        seed: u64,
        prefix: &str,
    ) -> (SynthConfig, serde_json::Value) {
        let f = &self.file;
        let base = SynthConfig::default();
        let noiseless = k.noiseless || f.noiseless.unwrap_or(false);
        let mut cfg = SynthConfig {
            num_images,
            vocabulary,
            rule_noise: pick(k.rule_noise, f.rule_noise, base.rule_noise),
            box_jitter: pick(k.box_jitter, f.box_jitter, base.box_jitter),
            attribute_prob: pick(k.attribute_prob, f.attribute_prob, base.attribute_prob),
            image_prefix: prefix.to_string(),
            seed,
            ..base
        };
        if noiseless {
            cfg = cfg.noiseless();
        }
        let v = json!({
            "num_images": cfg.num_images,
            "boxes_per_image": [cfg.boxes_per_image.0, cfg.boxes_per_image.1],
            "noiseless": noiseless,
            "rule_noise": cfg.rule_noise,
            "box_jitter": cfg.box_jitter,
            "score_range": [cfg.score_range.0, cfg.score_range.1],
            "attribute_prob": cfg.attribute_prob,
            "box_size": [cfg.box_size.0, cfg.box_size.1],
            "ambiguity_margin": cfg.ambiguity_margin,
            "image_prefix": cfg.image_prefix,
            "seed": cfg.seed,
        });
        (cfg, v)
    }

    fn sampling_config(
        &self,
        npp: Option<f64>,
        iou: Option<f64>,
        max_boxes: Option<usize>,
        seed: u64,
    ) -> (SamplingConfig, serde_json::Value) {
        let f = &self.file;
        let base = SamplingConfig::default();
        let cfg = SamplingConfig {
            negatives_per_positive: pick(npp, f.negatives_per_positive, base.negatives_per_positive),
            iou_threshold: pick(iou, f.iou_threshold, base.iou_threshold),
            max_boxes: pick(max_boxes, f.max_boxes, base.max_boxes),
            seed,
        };
        let v = json!({
            "negatives_per_positive": cfg.negatives_per_positive,
            "iou_threshold": cfg.iou_threshold,
            "max_boxes": cfg.max_boxes,
            "seed": cfg.seed,
        });
        (cfg, v)
    }

    fn train_config(&self, k: &TrainKnobs, seed: u64) -> Result<(TrainConfig, Objective, serde_json::Value)> {
        let f = &self.file;
        let base = TrainConfig::default();
        let cfg = TrainConfig {
            num_leaves: pick(k.num_leaves, f.num_leaves, base.num_leaves),
            learning_rate: pick(k.learning_rate, f.learning_rate, base.learning_rate),
            feature_fraction: pick(k.feature_fraction, f.feature_fraction, base.feature_fraction),
            bagging_fraction: pick(k.bagging_fraction, f.bagging_fraction, base.bagging_fraction),
            bagging_freq: pick(k.bagging_freq, f.bagging_freq, base.bagging_freq),
            num_rounds: pick(k.num_rounds, f.num_rounds, base.num_rounds),
            min_samples_per_leaf: pick(k.min_samples_per_leaf, f.min_samples_per_leaf, base.min_samples_per_leaf),
            max_bins: pick(k.max_bins, f.max_bins, base.max_bins),
            seed,
            ..base
        };
        cfg.validate()?;
        let ce = Objective::cross_entropy();
        let name = pick(k.objective, f.objective, ObjectiveName::Ce);
        let gamma = pick(k.gamma, f.gamma, ce.gamma);
        let alpha = pick(k.alpha, f.alpha, ce.alpha);
        let objective = match name {
            ObjectiveName::Ce => Objective { gamma, alpha, ..ce },
            ObjectiveName::Focal => Objective::focal(gamma, alpha)?,
        };
        let v = json!({
            "objective": match name { ObjectiveName::Ce => "ce", ObjectiveName::Focal => "focal" },
            "gamma": gamma,
            "alpha": alpha,
            "num_leaves": cfg.num_leaves,
            "learning_rate": cfg.learning_rate,
            "feature_fraction": cfg.feature_fraction,
            "bagging_fraction": cfg.bagging_fraction,
            "bagging_freq": cfg.bagging_freq,
            "num_rounds": cfg.num_rounds,
            "min_samples_per_leaf": cfg.min_samples_per_leaf,
            "max_bins": cfg.max_bins,
            "min_sum_hessian": cfg.min_sum_hessian,
            "lambda_l2": cfg.lambda_l2,
            "seed": cfg.seed,
        });
        Ok((cfg, objective, v))
    }

    fn candidate_config(&self, top_k: Option<usize>, max_boxes: Option<usize>) -> (CandidateConfig, serde_json::Value) {
        let base = CandidateConfig::default();
        let cfg = CandidateConfig {
            top_k: pick(top_k, self.file.top_k, base.top_k),
            max_boxes: pick(max_boxes, self.file.max_boxes, base.max_boxes),
        };
        (cfg, json!({ "top_k": cfg.top_k, "max_boxes": cfg.max_boxes }))
    }

    fn eval_config(&self, k: &EvalKnobs, iou: Option<f64>) -> Result<(EvalConfig, serde_json::Value)> {
        let f = &self.file;
        let base = EvalConfig::default();
        let grouping = pick(k.grouping, f.grouping, GroupingName::Relation);
        let cfg = EvalConfig {
            iou_threshold: pick(iou, f.iou_threshold, base.iou_threshold),
            recall_n: pick(k.recall_n, f.recall_n, base.recall_n),
            grouping: match grouping {
                GroupingName::Relation => ApGrouping::PerRelation,
                GroupingName::Triplet => ApGrouping::PerTriplet,
            },
            ..base
        };
        cfg.validate()?;
        let v = json!({
            "iou_threshold": cfg.iou_threshold,
            "recall_n": cfg.recall_n,
            "weights": cfg.weights,
            "grouping": match grouping { GroupingName::Relation => "relation", GroupingName::Triplet => "triplet" },
        });
        Ok((cfg, v))
    }
}

fn warn_skipped(out: &mut dyn Write, path: &Path, skipped: &[csvio::SkippedRow]) -> Result<()> {
    for s in skipped {
        writeln!(out, "skipped {}:{}: {}", path.display(), s.line, s.message).map_err(stdout_err)?;
    }
    Ok(())
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

struct WorldFiles {
    ground_truth: PathBuf,
    detections: PathBuf,
    is_detections: PathBuf,
}

fn world_files(dir: &Path) -> WorldFiles {
    WorldFiles {
        ground_truth: dir.join("ground_truth.csv"),
        detections: dir.join("detections.csv"),
        is_detections: dir.join("is_detections.csv"),
    }
}

fn write_world(dir: &Path, world: &SynthWorld, vocab: &TripletVocabulary) -> Result<WorldFiles> {
    let files = world_files(dir);
    csvio::write_ground_truth(&files.ground_truth, vocab, &world.ground_truth)?;
    csvio::write_detections(&files.detections, vocab, &world.detections)?;
    let map = IsTripletClassMap::from_vocabulary(vocab);
    csvio::write_detections(&files.is_detections, &map, &world.is_detections)?;
    Ok(files)
}

/// Human-readable table followed by one `key=value` summary line.
pub fn format_report(report: &EvalReport, vocab: &TripletVocabulary, recall_n: usize) -> String {
    let mut s = String::new();
    let name = |k: &GroupKey| match k {
        GroupKey::Relation(r) => vocab.relation_name(*r).to_string(),
        GroupKey::Triplet(t) => vocab.describe(t),
    };
    let width = report.groups.iter().map(|g| name(&g.key).len()).max().unwrap_or(5).max(5);
    let _ = writeln!(s, "{:<width$}  {:>8}  {:>8}  {:>9}  {:>9}", "group", "num_gt", "preds", "AP_rel", "AP_phrase");
    for g in &report.groups {
        let _ = writeln!(
            s,
            "{:<width$}  {:>8}  {:>8}  {:>9.6}  {:>9.6}",
            name(&g.key),
            g.num_gt,
            g.num_predictions,
            g.ap_rel,
            g.ap_phrase
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "mAP_rel      {:.6}", report.map_rel);
    let _ = writeln!(s, "Recall@{:<5} {:.6}", recall_n, report.recall_at_n);
    let _ = writeln!(s, "mAP_phrase   {:.6}", report.map_phrase);
    let _ = writeln!(s, "final        {:.6}", report.final_score);
    let _ = writeln!(
        s,
        "map_rel={:.6} recall_at_n={:.6} map_phrase={:.6} final_score={:.6} recall_n={} num_predictions={} num_ground_truth={}",
        report.map_rel,
        report.recall_at_n,
        report.map_phrase,
        report.final_score,
        recall_n,
        report.num_predictions,
        report.num_ground_truth
    );
    s
}

fn gen_synth(ctx: &Ctx, a: &GenSynthArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, vocab_path) = ctx.vocabulary(&a.vocab)?;
    let n = pick(a.images, ctx.file.images, SynthConfig::default().num_images);
    let (cfg, v) = ctx.synth_config(&a.synth, vocab, n, ctx.seed, "img");
    let world = synth::generate(&cfg)?;
    let vocab_out = a.out_dir.join("vocab.csv");
    csvio::write_vocabulary(&vocab_out, &cfg.vocabulary)?;
    let files = write_world(&a.out_dir, &world, &cfg.vocabulary)?;
    writeln!(
        out,
        "images={} ground_truth={} detections={} is_detections={}",
        world.images.len(),
        world.ground_truth.len(),
        world.detections.len(),
        world.is_detections.len()
    )
    .map_err(stdout_err)?;
    let mut m = ctx.manifest("gen-synth", json!({ "synth": v }));
    if let Some(p) = &vocab_path {
        m.input("vocab", p);
    }
    m.output("vocab", &vocab_out)
        .output("ground_truth", &files.ground_truth)
        .output("detections", &files.detections)
        .output("is_detections", &files.is_detections);
    ctx.finish(&files.ground_truth, m)
}

fn extract(ctx: &Ctx, a: &ExtractArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, vocab_path) = ctx.vocabulary(&a.vocab)?;
    let (cfg, v) = ctx.sampling_config(a.negatives_per_positive, a.iou_threshold, a.max_boxes, ctx.seed);
    let dets = csvio::parse_detections(&a.detections, &vocab, ctx.policy)?;
    warn_skipped(out, &a.detections, &dets.skipped)?;
    let gts = csvio::parse_ground_truth(&a.ground_truth, &vocab, ctx.policy)?;
    warn_skipped(out, &a.ground_truth, &gts.skipped)?;
    let pairs = build_training_set(&dets.records, &gts.records, &vocab, &cfg)?;
    let table = FeatureTable::from_pairs(&pairs);
    features::write_features(&a.out, &table)?;
    writeln!(out, "rows={} positives={}", pairs.len(), pairs.positives()).map_err(stdout_err)?;
    let mut m = ctx.manifest("extract-features", json!({ "sampling": v }));
    if let Some(p) = &vocab_path {
        m.input("vocab", p);
    }
    m.input("detections", &a.detections).input("ground_truth", &a.ground_truth).output("features", &a.out);
    ctx.finish(&a.out, m)
}

fn fit(table: &FeatureTable, cfg: &TrainConfig, obj: &Objective) -> Result<(BoostedModel, gbdt::TrainReport)> {
    if table.rows.is_empty() {
        return Err(vrd_core::Error::EmptyDataset.into());
    }
    Ok(gbdt::train(&table.dataset()?, &table.labels, cfg, obj)?)
}

fn train_cmd(ctx: &Ctx, a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let (cfg, obj, v) = ctx.train_config(&a.train, ctx.seed)?;
    let table = features::load_features(&a.features)?;
    let (model, report) = fit(&table, &cfg, &obj)?;
    model_io::save_model(&a.out, &model)?;
    writeln!(
        out,
        "rows={} trees={} final_loss={:.6}",
        table.rows.len(),
        model.trees().len(),
        report.loss_history.last().copied().unwrap_or(f64::NAN)
    )
    .map_err(stdout_err)?;
    let mut m = ctx.manifest("train", json!({ "train": v }));
    m.input("features", &a.features).output("model", &a.out);
    ctx.finish(&a.out, m)
}

fn score_cmd(ctx: &Ctx, a: &ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, vocab_path) = ctx.vocabulary(&a.vocab)?;
    let (cfg, v) = ctx.candidate_config(a.top_k, a.max_boxes);
    let model = model_io::load_model(&a.model)?;
    let map = IsTripletClassMap::from_vocabulary(&vocab);
    let dets = csvio::parse_detections(&a.detections, &vocab, ctx.policy)?;
    warn_skipped(out, &a.detections, &dets.skipped)?;
    let is_dets = match &a.is_detections {
        Some(p) => {
            let parsed = csvio::parse_detections(p, &map, ctx.policy)?;
            warn_skipped(out, p, &parsed.skipped)?;
            parsed.records
        }
        None => Vec::new(),
    };
    let preds = parallel::score_images(&ctx.pool()?, &dets.records, &is_dets, &model, &vocab, &map, &cfg)?;
    csvio::write_predictions(&a.out, &vocab, &preds)?;
    writeln!(out, "predictions={}", preds.len()).map_err(stdout_err)?;
    let mut m = ctx.manifest("score", json!({ "candidates": v }));
    if let Some(p) = &vocab_path {
        m.input("vocab", p);
    }
    m.input("model", &a.model).input("detections", &a.detections);
    if let Some(p) = &a.is_detections {
        m.input("is_detections", p);
    }
    m.output("predictions", &a.out);
    ctx.finish(&a.out, m)
}

fn evaluate_cmd(ctx: &Ctx, a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, vocab_path) = ctx.vocabulary(&a.vocab)?;
    let (cfg, v) = ctx.eval_config(&a.eval, a.iou_threshold)?;
    let preds = csvio::parse_predictions(&a.predictions, &vocab, ctx.policy)?;
    warn_skipped(out, &a.predictions, &preds.skipped)?;
    let gts = csvio::parse_ground_truth(&a.ground_truth, &vocab, ctx.policy)?;
    warn_skipped(out, &a.ground_truth, &gts.skipped)?;
    let report = parallel::evaluate(&ctx.pool()?, &preds.records, &gts.records, &cfg)?;
    let text = format_report(&report, &vocab, cfg.recall_n);
    out.write_all(text.as_bytes()).map_err(stdout_err)?;
    if let Some(p) = &a.out {
        write_text(p, &text)?;
        let mut m = ctx.manifest("evaluate", json!({ "eval": v }));
        if let Some(vp) = &vocab_path {
            m.input("vocab", vp);
        }
        m.input("predictions", &a.predictions).input("ground_truth", &a.ground_truth).output("report", p);
        ctx.finish(p, m)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Each stage of an end-to-end run draws from its own stream of the base seed.
pub const E2E_STAGES: [&str; 4] = ["e2e/train-world", "e2e/test-world", "e2e/sampling", "e2e/gbdt"];

fn e2e(ctx: &Ctx, a: &E2eArgs, out: &mut dyn Write) -> Result<()> {
    let f = &ctx.file;
    let (vocab, vocab_path) = ctx.vocabulary(&a.vocab)?;
    let n_train = pick(a.train_images, f.train_images, 200);
    let n_test = pick(a.test_images, f.test_images, 50);
    let [s_train, s_test, s_sampling, s_gbdt] = E2E_STAGES.map(|stage| derive_seed(ctx.seed, stage));
    let (train_cfg, train_v) = ctx.synth_config(&a.synth, vocab.clone(), n_train, s_train, "train");
    let (test_cfg, test_v) = ctx.synth_config(&a.synth, vocab.clone(), n_test, s_test, "test");
    let (sampling, sampling_v) =
        ctx.sampling_config(a.negatives_per_positive, a.iou_threshold, a.max_boxes, s_sampling);
    let (tcfg, obj, tv) = ctx.train_config(&a.train, s_gbdt)?;
    let (ccfg, cv) = ctx.candidate_config(a.top_k, a.max_boxes);
    let (ecfg, ev) = ctx.eval_config(&a.eval, a.iou_threshold)?;
    let config = json!({
        "train_world": train_v,
        "test_world": test_v,
        "sampling": sampling_v,
        "train": tv,
        "candidates": cv,
        "eval": ev,
    });

    let dir = &a.out_dir;
    let vocab_out = dir.join("vocab.csv");
    csvio::write_vocabulary(&vocab_out, &vocab)?;
    let train_world = synth::generate(&train_cfg)?;
    let test_world = synth::generate(&test_cfg)?;
    let train_files = write_world(&dir.join("train"), &train_world, &vocab)?;
    let test_files = write_world(&dir.join("test"), &test_world, &vocab)?;

    let pairs = build_training_set(&train_world.detections, &train_world.ground_truth, &vocab, &sampling)?;
    let table = FeatureTable::from_pairs(&pairs);
    let features_out = dir.join("features.csv");
    features::write_features(&features_out, &table)?;

    let (model, _) = fit(&table, &tcfg, &obj)?;
    let model_out = dir.join("model.bin");
    model_io::save_model(&model_out, &model)?;

    let pool = ctx.pool()?;
    let map = IsTripletClassMap::from_vocabulary(&vocab);
    let preds =
        parallel::score_images(&pool, &test_world.detections, &test_world.is_detections, &model, &vocab, &map, &ccfg)?;
    let preds_out = dir.join("predictions.csv");
    csvio::write_predictions(&preds_out, &vocab, &preds)?;

    let report = parallel::evaluate(&pool, &preds, &test_world.ground_truth, &ecfg)?;
    let text = format_report(&report, &vocab, ecfg.recall_n);
    let report_out = dir.join("report.txt");
    write_text(&report_out, &text)?;
    writeln!(out, "training_rows={} positives={} trees={}", pairs.len(), pairs.positives(), model.trees().len())
        .map_err(stdout_err)?;
    out.write_all(text.as_bytes()).map_err(stdout_err)?;

    let mut m = ctx.manifest("e2e", config);
    if let Some(p) = &vocab_path {
        m.input("vocab", p);
    }
    m.output("vocab", &vocab_out)
        .output("train_ground_truth", &train_files.ground_truth)
        .output("train_detections", &train_files.detections)
        .output("train_is_detections", &train_files.is_detections)
        .output("test_ground_truth", &test_files.ground_truth)
        .output("test_detections", &test_files.detections)
        .output("test_is_detections", &test_files.is_detections)
        .output("features", &features_out)
        .output("model", &model_out)
        .output("predictions", &preds_out)
        .output("report", &report_out);
    ctx.finish(&report_out, m)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let ctx = Ctx::new(cli)?;
    match &cli.command {
        Command::GenSynth(a) => gen_synth(&ctx, a, out),
        Command::ExtractFeatures(a) => extract(&ctx, a, out),
        Command::Train(a) => train_cmd(&ctx, a, out),
        Command::Score(a) => score_cmd(&ctx, a, out),
        Command::Evaluate(a) => evaluate_cmd(&ctx, a, out),
        Command::E2e(a) => e2e(&ctx, a, out),
    }
}

/// One-line machine-parseable failure record.
pub fn error_line(kind: ErrorKind, message: &str) -> String {
    let flat = message.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("error kind={} code={} message={}", kind.as_str(), kind.exit_code(), serde_json::Value::String(flat))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(out, "{}", e.render());
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand {
                    ErrorKind::Usage.exit_code()
                } else {
                    0
                };
            }
            let _ = writeln!(err, "{}", error_line(ErrorKind::Usage, &e.render().to_string()));
            return ErrorKind::Usage.exit_code();
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let kind = e.kind();
            let _ = writeln!(err, "{}", error_line(kind, &e.to_string()));
            kind.exit_code()
        }
    }
}
