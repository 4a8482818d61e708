//! Full-pipeline orchestration: data, pretraining, baseline, two
//! supervised steps, pseudo-labeling, prediction, and evaluation, with a
//! run manifest hashing every artifact the run writes.
//!
//! Stages run sequentially inside one run directory, guarded by a lock
//! file. A stage failure persists the partial manifest (with the failed
//! stage named) before the error propagates.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig};
use crate::data::store::{load_feature_store, load_hidden_gold, save_feature_store, save_hidden_gold};
use crate::data::synthetic::generate_synthetic;
use crate::data::{class_histogram, ClassHistogram, DatasetSplit, EmotionLabel, FeatureRecord};
use crate::error::{Error, Result};
use crate::metrics::{compute_waf, EvalReport};
use crate::network::checkpoint::{save_baseline, save_bundle};
use crate::network::EncoderBundle;
use crate::predict::predict_labels;
use crate::seeds::sha256_hex;
use crate::selftrain::{
    accepted_records, generate_pseudo_labels, pseudo_label_summary, save_pseudo_labels, Decision,
};
use crate::trainer::{pretrain, train_baseline, train_supervised, Stage, TrainReport};

/// Ablation toggles: each disables one ingredient of the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    Pretrain,
    Nee,
    Pseudo,
    Oversample,
}

impl Toggle {
    pub const ALL: [Toggle; 4] = [Toggle::Pretrain, Toggle::Nee, Toggle::Pseudo, Toggle::Oversample];

    pub fn as_str(self) -> &'static str {
        match self {
            Toggle::Pretrain => "pretrain",
            Toggle::Nee => "nee",
            Toggle::Pseudo => "pseudo",
            Toggle::Oversample => "oversample",
        }
    }
}

impl FromStr for Toggle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pretrain" => Ok(Toggle::Pretrain),
            "nee" => Ok(Toggle::Nee),
            "pseudo" => Ok(Toggle::Pseudo),
            "oversample" => Ok(Toggle::Oversample),
            other => Err(Error::config(format!(
                "unknown toggle `{other}` (expected pretrain, nee, pseudo, or oversample)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SkipSet {
    pub pretrain: bool,
    pub nee: bool,
    pub pseudo: bool,
    pub oversample: bool,
}

impl SkipSet {
    pub fn from_toggles(toggles: &[Toggle]) -> Self {
        let mut set = SkipSet::default();
        for t in toggles {
            match t {
                Toggle::Pretrain => set.pretrain = true,
                Toggle::Nee => set.nee = true,
                Toggle::Pseudo => set.pseudo = true,
                Toggle::Oversample => set.oversample = true,
            }
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// completed | skipped | failed
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub stages: Vec<StageRecord>,
    /// Feature-store files backing the run, hashed.
    pub input_data: BTreeMap<String, String>,
    /// Every file the run wrote (relative to the run dir), hashed.
    /// `run_manifest.json` itself is the one exception.
    pub artifacts: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub waf: f64,
    pub eval: EvalReport,
    pub stages: BTreeMap<String, TrainReport>,
    /// Gold training-class distribution before oversampling.
    pub train_histogram: ClassHistogram,
    pub pseudo_summary: Option<ClassHistogram>,
    pub config_hash: String,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub manifest: RunManifest,
    pub report: PipelineReport,
}

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const PSEUDO_LABELS_FILE: &str = "pseudo_labels.jsonl";
const LOCK_FILE: &str = "lock";

/// Removes the lock file when the run ends, success or failure.
struct RunLock {
    path: PathBuf,
}

impl RunLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::config(format!(
                "run directory {} is locked by another pipeline (remove `lock` if stale)",
                dir.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn relative_to(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn walk_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    paths.sort();
    for path in paths {
        if path.is_dir() {
            walk_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Artifact tracker: every write through it lands in the manifest.
struct Artifacts {
    root: PathBuf,
    map: BTreeMap<String, String>,
}

impl Artifacts {
    fn new(root: &Path) -> Self {
        Artifacts {
            root: root.to_path_buf(),
            map: BTreeMap::new(),
        }
    }

    fn record_file(&mut self, path: &Path) -> Result<()> {
        let rel = relative_to(&self.root, path);
        let hash = hash_file(path)?;
        self.map.insert(rel, hash);
        Ok(())
    }

    fn record_tree(&mut self, dir: &Path) -> Result<()> {
        let mut files = Vec::new();
        walk_files(dir, &mut files)?;
        for file in files {
            self.record_file(&file)?;
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let path = self.root.join(rel);
        let body = serde_json::to_string_pretty(value)
            .map_err(|e| Error::format(format!("serializing {rel}: {e}")))?;
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.record_file(&path)?;
        Ok(path)
    }
}

fn persist_manifest(manifest: &RunManifest, out_dir: &Path) -> Result<()> {
    let path = out_dir.join(RUN_MANIFEST_FILE);
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::format(format!("serializing run manifest: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

/// Marks a stage outcome; on failure the partial manifest is persisted and
/// the error is wrapped with the stage name.
fn finish_stage<T>(
    manifest: &mut RunManifest,
    out_dir: &Path,
    name: &str,
    result: Result<T>,
) -> Result<T> {
    match result {
        Ok(value) => {
            manifest.stages.push(StageRecord {
                name: name.to_string(),
                status: "completed".to_string(),
            });
            Ok(value)
        }
        Err(e) => {
            manifest.stages.push(StageRecord {
                name: name.to_string(),
                status: "failed".to_string(),
            });
            let _ = persist_manifest(manifest, out_dir);
            Err(e.in_stage(name))
        }
    }
}

fn skip_stage(manifest: &mut RunManifest, name: &str) {
    manifest.stages.push(StageRecord {
        name: name.to_string(),
        status: "skipped".to_string(),
    });
}

pub fn write_predictions_csv(path: &Path, predictions: &[(String, EmotionLabel)]) -> Result<()> {
    let mut body = String::from("name,discrete\n");
    for (id, label) in predictions {
        body.push_str(id);
        body.push(',');
        body.push_str(label.as_str());
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<(String, EmotionLabel)>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = body.lines();
    match lines.next() {
        Some("name,discrete") => {}
        other => {
            return Err(Error::format(format!(
                "{}: expected header `name,discrete`, found {:?}",
                path.display(),
                other
            )))
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line.split_once(',').ok_or_else(|| {
            Error::format(format!("{}:{}: malformed row", path.display(), lineno + 2))
        })?;
        out.push((id.to_string(), EmotionLabel::from_str(label.trim())?));
    }
    Ok(out)
}

/// Joins predictions against gold-labeled records by id; every gold id
/// must be covered, extra predictions are ignored.
pub fn evaluate_predictions(
    predictions: &[(String, EmotionLabel)],
    gold: &[FeatureRecord],
) -> Result<EvalReport> {
    let by_id: BTreeMap<&str, EmotionLabel> = predictions
        .iter()
        .map(|(id, label)| (id.as_str(), *label))
        .collect();
    let mut y_true = Vec::with_capacity(gold.len());
    let mut y_pred = Vec::with_capacity(gold.len());
    for record in gold {
        let truth = record.label.ok_or_else(|| {
            Error::contract(format!("gold record `{}` has no label", record.id))
        })?;
        let predicted = by_id.get(record.id.as_str()).ok_or_else(|| {
            Error::validation(format!("no prediction for gold record `{}`", record.id))
        })?;
        y_true.push(truth);
        y_pred.push(*predicted);
    }
    compute_waf(&y_true, &y_pred)
}

/// Resolves the dataset for a config: generates and persists a synthetic
/// store under `data_dir`, or loads the configured store path.
fn resolve_data(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    artifacts: Option<&mut Artifacts>,
) -> Result<(DatasetSplit, PathBuf)> {
    match cfg.data.source {
        DataSource::Synthetic => {
            let spec = cfg.synthetic_spec()?;
            let output = generate_synthetic(&spec)?;
            let data_dir = out_dir.join("data");
            save_feature_store(&output.split, &data_dir)?;
            save_hidden_gold(&data_dir, &output.hidden_gold)?;
            if let Some(artifacts) = artifacts {
                artifacts.record_tree(&data_dir)?;
            }
            Ok((output.split, data_dir))
        }
        DataSource::Store => {
            let path = cfg
                .data
                .path
                .as_ref()
                .ok_or_else(|| Error::config("data.source = \"store\" requires data.path"))?;
            let dir = PathBuf::from(path);
            let split = load_feature_store(&dir)?;
            Ok((split, dir))
        }
    }
}

fn data_hashes(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    walk_files(dir, &mut files)?;
    let mut out = BTreeMap::new();
    for file in files {
        out.insert(relative_to(dir, &file), hash_file(&file)?);
    }
    Ok(out)
}

/// Runs the full pipeline into `out_dir`. `skips` disables individual
/// ingredients (the ablation axes); the skipped stages are recorded in the
/// manifest.
pub fn run_full_pipeline(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    skips: &SkipSet,
) -> Result<PipelineOutcome> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let _lock = RunLock::acquire(out_dir)?;

    // Validate the derived configs before any stage runs.
    let mut train_cfg = cfg.train_config();
    if skips.oversample {
        train_cfg.oversample_step1.clear();
        train_cfg.oversample_step2.clear();
    }
    train_cfg.validate()?;
    let voting = cfg.voting_config();
    voting.validate()?;
    let policy = cfg.threshold_policy();
    policy.validate()?;
    let loss_cfg = cfg.contrastive_config();
    loss_cfg.validate()?;
    let schedule = if skips.nee { None } else { cfg.noise_schedule()? };

    let mut manifest = RunManifest {
        config_hash: cfg.hash()?,
        ..RunManifest::default()
    };
    let mut artifacts = Artifacts::new(out_dir);

    let config_path = out_dir.join("config.toml");
    cfg.save(&config_path)?;
    artifacts.record_file(&config_path)?;

    // data
    let (split, data_dir) = finish_stage(
        &mut manifest,
        out_dir,
        "data",
        resolve_data(cfg, out_dir, Some(&mut artifacts)),
    )?;
    manifest.input_data = data_hashes(&data_dir)?;
    let train_histogram = class_histogram(&split.labeled_train)?;

    let net_cfg = cfg.network_config(split.dims);
    let mut bundle = EncoderBundle::init(net_cfg)?;
    let mut stage_reports: BTreeMap<String, TrainReport> = BTreeMap::new();
    let checkpoints = out_dir.join("checkpoints");

    // pretrain
    if skips.pretrain {
        skip_stage(&mut manifest, "pretrain");
    } else {
        let report = finish_stage(
            &mut manifest,
            out_dir,
            "pretrain",
            pretrain(&mut bundle, &split.unlabeled, schedule.as_ref(), &loss_cfg, &train_cfg),
        )?;
        let dir = checkpoints.join("pretrained");
        save_bundle(&bundle, &dir)?;
        artifacts.record_tree(&dir)?;
        manifest.metrics.insert("pretrain_best_loss".to_string(), report.best_value);
        stage_reports.insert(
            "pretrain".to_string(),
            TrainReport { checkpoint: Some(dir), ..report },
        );
    }

    // baseline
    let bcfg = cfg.baseline_config(split.dims);
    let (baseline, baseline_report) = finish_stage(
        &mut manifest,
        out_dir,
        "baseline",
        train_baseline(&split.labeled_train, &split.validation, &bcfg, &train_cfg),
    )?;
    let baseline_dir = checkpoints.join("baseline");
    save_baseline(&baseline, &baseline_dir)?;
    artifacts.record_tree(&baseline_dir)?;
    manifest
        .metrics
        .insert("baseline_waf".to_string(), baseline_report.best_value);
    stage_reports.insert(
        "baseline".to_string(),
        TrainReport { checkpoint: Some(baseline_dir), ..baseline_report },
    );

    let contrastive_args = train_cfg
        .contrastive_in_supervised
        .then_some((&loss_cfg, schedule.as_ref()));

    // supervised step one
    let stage1_report = finish_stage(
        &mut manifest,
        out_dir,
        "stage1",
        train_supervised(
            &mut bundle,
            &split.labeled_train,
            &split.validation,
            Stage::One,
            None,
            &train_cfg,
            &voting,
            contrastive_args,
        ),
    )?;
    let stage1_dir = checkpoints.join("stage1");
    save_bundle(&bundle, &stage1_dir)?;
    artifacts.record_tree(&stage1_dir)?;
    manifest
        .metrics
        .insert("stage1_waf".to_string(), stage1_report.best_value);
    stage_reports.insert(
        "stage1".to_string(),
        TrainReport { checkpoint: Some(stage1_dir), ..stage1_report },
    );

    // pseudo-labeling
    let (pseudo_records, pseudo_summary) = if skips.pseudo {
        skip_stage(&mut manifest, "pseudo-label");
        (Vec::new(), None)
    } else {
        let decisions = finish_stage(
            &mut manifest,
            out_dir,
            "pseudo-label",
            generate_pseudo_labels(&bundle, &voting, &baseline, &split.unlabeled, &policy),
        )?;
        let path = out_dir.join(PSEUDO_LABELS_FILE);
        save_pseudo_labels(&decisions, &path)?;
        artifacts.record_file(&path)?;
        let summary = pseudo_label_summary(&decisions);
        let accepted = accepted_records(&split.unlabeled, &decisions)?;
        manifest
            .metrics
            .insert("pseudo_accepted".to_string(), accepted.len() as f64);
        // When the synthetic sidecar exists, audit accepted labels against
        // the hidden gold.
        if let Ok(hidden) = load_hidden_gold(&data_dir) {
            let mut correct = 0usize;
            let mut total = 0usize;
            for d in &decisions {
                if d.decision == Decision::Accepted {
                    if let (Some(agreed), Some(truth)) = (d.agreed_label, hidden.get(&d.sample_id)) {
                        total += 1;
                        if agreed == *truth {
                            correct += 1;
                        }
                    }
                }
            }
            if total > 0 {
                manifest
                    .metrics
                    .insert("pseudo_accuracy".to_string(), correct as f64 / total as f64);
            }
        }
        (accepted, Some(summary))
    };

    // supervised step two
    let stage2_report = finish_stage(
        &mut manifest,
        out_dir,
        "stage2",
        train_supervised(
            &mut bundle,
            &split.labeled_train,
            &split.validation,
            Stage::Two,
            Some(&pseudo_records),
            &train_cfg,
            &voting,
            contrastive_args,
        ),
    )?;
    let stage2_dir = checkpoints.join("stage2");
    save_bundle(&bundle, &stage2_dir)?;
    artifacts.record_tree(&stage2_dir)?;
    manifest
        .metrics
        .insert("stage2_waf".to_string(), stage2_report.best_value);
    stage_reports.insert(
        "stage2".to_string(),
        TrainReport { checkpoint: Some(stage2_dir), ..stage2_report },
    );

    // predict on validation
    let predictions = finish_stage(&mut manifest, out_dir, "predict", {
        let refs: Vec<&FeatureRecord> = split.validation.iter().collect();
        predict_labels(&bundle, &voting, &refs).map(|labels| {
            refs.iter()
                .zip(labels)
                .map(|(r, l)| (r.id.clone(), l))
                .collect::<Vec<_>>()
        })
    })?;
    let pred_path = out_dir.join(PREDICTIONS_FILE);
    write_predictions_csv(&pred_path, &predictions)?;
    artifacts.record_file(&pred_path)?;

    // evaluate
    let eval = finish_stage(
        &mut manifest,
        out_dir,
        "evaluate",
        evaluate_predictions(&predictions, &split.validation),
    )?;
    manifest.metrics.insert("waf".to_string(), eval.waf);

    let report = PipelineReport {
        waf: eval.waf,
        eval,
        stages: stage_reports,
        train_histogram,
        pseudo_summary,
        config_hash: manifest.config_hash.clone(),
    };
    artifacts.write_json(REPORT_FILE, &report)?;

    manifest.artifacts = artifacts.map.clone();
    persist_manifest(&manifest, out_dir)?;

    Ok(PipelineOutcome { manifest, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub toggles: Vec<String>,
    pub waf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn render_text(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(6)
            .max("system".len());
        let mut out = format!("{:<name_width$}  {:>7}\n", "system", "WAF");
        for row in &self.rows {
            out.push_str(&format!("{:<name_width$}  {:>7.4}\n", row.name, row.waf));
        }
        out
    }
}

/// Runs the full pipeline once, then once per requested toggle, sharing
/// the generated dataset across rows. Emits `ablation.json` in `out_dir`.
pub fn ablate(cfg: &ExperimentConfig, toggles: &[Toggle], out_dir: &Path) -> Result<AblationTable> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    // Generate (or reference) the dataset once; rows then load the store.
    let mut shared_cfg = cfg.clone();
    if cfg.data.source == DataSource::Synthetic {
        let (_, data_dir) = resolve_data(cfg, out_dir, None)?;
        shared_cfg.data.source = DataSource::Store;
        shared_cfg.data.path = Some(data_dir.to_string_lossy().into_owned());
    }

    let mut rows = Vec::new();
    let full_dir = out_dir.join("full");
    let full = run_full_pipeline(&shared_cfg, &full_dir, &SkipSet::default())?;
    rows.push(AblationRow {
        name: "full".to_string(),
        toggles: Vec::new(),
        waf: full.report.waf,
    });

    let mut seen = HashSet::new();
    for &toggle in toggles {
        if !seen.insert(toggle) {
            continue;
        }
        let skips = SkipSet::from_toggles(&[toggle]);
        let row_dir = out_dir.join(format!("wo_{}", toggle.as_str()));
        let outcome = run_full_pipeline(&shared_cfg, &row_dir, &skips)?;
        rows.push(AblationRow {
            name: format!("w/o {}", toggle.as_str()),
            toggles: vec![toggle.as_str().to_string()],
            waf: outcome.report.waf,
        });
    }

    let table = AblationTable { rows };
    let path = out_dir.join("ablation.json");
    let body = serde_json::to_string_pretty(&table)
        .map_err(|e| Error::format(format!("serializing ablation table: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(table)
}

/// Renders the report-command plots for a finished run directory.
pub fn render_run_plots(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let report_path = run_dir.join(REPORT_FILE);
    let body = std::fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
    let report: PipelineReport = serde_json::from_str(&body)
        .map_err(|e| Error::format(format!("malformed report.json: {e}")))?;

    let mut written = Vec::new();

    let stage_order = ["pretrain", "baseline", "stage1", "stage2"];
    let mut loss_series: Vec<(&str, &[f64])> = Vec::new();
    let mut val_series: Vec<(&str, &[f64])> = Vec::new();
    for name in stage_order {
        if let Some(stage) = report.stages.get(name) {
            loss_series.push((name, &stage.train_loss));
            if stage.metric == crate::trainer::MetricKind::ValidationWaf {
                val_series.push((name, &stage.val_metric));
            }
        }
    }
    let loss_path = run_dir.join("loss_curve.png");
    crate::plot::render_line_chart(&loss_series, &loss_path)?;
    written.push(loss_path);

    let val_path = run_dir.join("validation_curve.png");
    crate::plot::render_line_chart(&val_series, &val_path)?;
    written.push(val_path);

    let confusion_path = run_dir.join("confusion_matrix.png");
    crate::plot::render_confusion(&report.eval.confusion, &confusion_path)?;
    written.push(confusion_path);

    let dist_path = run_dir.join("class_distribution.png");
    crate::plot::render_bars(&report.train_histogram.counts, &dist_path)?;
    written.push(dist_path);

    Ok(written)
}
