//! `emorec`: command-line pipeline for semi-supervised trimodal emotion
//! recognition over precomputed per-utterance feature vectors.
//!
//! Stage subcommands mirror the pipeline: `synth-data`, `pretrain`,
//! `train`, `pseudo-label`, `predict`, `evaluate`, `ablate`, `report`,
//! plus `run` for the whole sequence. Exit codes: 0 success, 2
//! configuration error, 3 data error, 4 stage or contract failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use emorec_core::config::{DataSource, ExperimentConfig};
use emorec_core::data::store::{load_feature_store, save_feature_store, save_hidden_gold};
use emorec_core::data::synthetic::{generate_synthetic, SyntheticSpec};
use emorec_core::data::{DatasetSplit, Dims, EmotionLabel, FeatureRecord};
use emorec_core::error::{Error, Result};
use emorec_core::network::checkpoint::{load_baseline, load_bundle, save_baseline, save_bundle};
use emorec_core::network::EncoderBundle;
use emorec_core::pipeline::{
    ablate, evaluate_predictions, read_predictions_csv, render_run_plots, run_full_pipeline,
    write_predictions_csv, SkipSet, Toggle,
};
use emorec_core::predict::predict_labels;
use emorec_core::selftrain::{
    accepted_records, generate_pseudo_labels, load_pseudo_labels, pseudo_label_summary,
    save_pseudo_labels,
};
use emorec_core::trainer::{pretrain, train_baseline, train_supervised, Stage, TrainReport};

#[derive(Parser)]
#[command(
    name = "emorec",
    about = "Semi-supervised trimodal emotion recognition on precomputed features",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (TOML); defaults apply when omitted.
    /// Any key can be overridden via EMOREC__SECTION__KEY env vars.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<ExperimentConfig> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path),
            None => Ok(ExperimentConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic feature store.
    SynthData {
        /// Per-class labeled counts: neutral,angry,happy,sad,worried,surprise.
        #[arg(long, value_delimiter = ',', default_value = "1248,1208,1038,730,616,190")]
        priors: Vec<usize>,
        /// Feature dims per modality: v,a,t.
        #[arg(long, value_delimiter = ',', default_value = "64,96,128")]
        dims: Vec<usize>,
        /// Unlabeled pool size.
        #[arg(long, default_value_t = 10_000)]
        unlabeled: usize,
        #[arg(long, default_value_t = 1.0)]
        means_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        /// Cross-modal coupling strength in [0, 1].
        #[arg(long, default_value_t = 0.7)]
        coupling: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Contrastive pretraining on the unlabeled pool.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Supervised training (stage 1 or 2) of the main or baseline model.
    Train {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run directory holding the checkpoint to start from
        /// (pretrained encoders for stage 1, stage-1 model for stage 2).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Pseudo-label decisions file (stage 2).
        #[arg(long)]
        pseudo: Option<PathBuf>,
        /// Train the stand-in baseline instead of the main model.
        #[arg(long)]
        baseline: bool,
        /// Override oversample targets, e.g. sad=850,worried=850,surprise=850.
        #[arg(long)]
        oversample: Option<String>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Two-model intersection pseudo-labeling of the unlabeled pool.
    PseudoLabel {
        /// Run directory of the main model (stage-1 checkpoint).
        #[arg(long)]
        main: PathBuf,
        /// Run directory of the baseline model.
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Threshold policy; only `default` is built in (override class
        /// thresholds via the config file).
        #[arg(long, default_value = "default")]
        policy: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Weighted soft-vote predictions as a `name,discrete` CSV.
    Predict {
        /// Run directory holding the model checkpoint.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Which split to predict: validation, unlabeled, or labeled.
        #[arg(long, default_value = "validation")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Score a predictions CSV against the gold validation labels.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        /// Feature-store directory holding the gold labels.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: data, pretrain, baseline, stage 1, pseudo-label,
    /// stage 2, predict, evaluate.
    Run {
        #[arg(long)]
        out: PathBuf,
        /// Ingredients to skip: pretrain, nee, pseudo, oversample.
        #[arg(long, value_delimiter = ',')]
        skip: Vec<String>,
        /// Feature-store directory (overrides the config's data section).
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Run the pipeline once per toggle and print a WAF comparison table.
    Ablate {
        /// Toggles to ablate: pretrain, nee, pseudo, oversample.
        #[arg(long, value_delimiter = ',', default_value = "pretrain,nee,pseudo,oversample")]
        toggles: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Render loss-curve, validation, confusion-matrix, and
    /// class-distribution plots for a finished run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn parse_priors(priors: &[usize]) -> Result<[usize; 6]> {
    priors
        .try_into()
        .map_err(|_| Error::config("expected exactly 6 class priors"))
}

fn write_train_report(out: &Path, report: &TrainReport) -> Result<()> {
    let path = out.join("train_report.json");
    let body = serde_json::to_string_pretty(report)
        .map_err(|e| Error::format(format!("serializing train report: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

fn parse_oversample(spec: &str) -> Result<BTreeMap<EmotionLabel, usize>> {
    let mut targets = BTreeMap::new();
    for part in spec.split(',') {
        let (name, count) = part
            .split_once('=')
            .ok_or_else(|| Error::config(format!("malformed oversample entry `{part}`")))?;
        let label = EmotionLabel::from_str(name.trim())
            .map_err(|_| Error::config(format!("unknown class `{name}` in oversample spec")))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad count in oversample entry `{part}`")))?;
        targets.insert(label, count);
    }
    Ok(targets)
}

fn split_records<'a>(split: &'a DatasetSplit, name: &str) -> Result<&'a [FeatureRecord]> {
    match name {
        "validation" => Ok(&split.validation),
        "unlabeled" => Ok(&split.unlabeled),
        "labeled" => Ok(&split.labeled_train),
        other => Err(Error::config(format!(
            "unknown split `{other}` (expected validation, unlabeled, or labeled)"
        ))),
    }
}

/// Loads the main-model checkpoint from a run directory, accepting either
/// a checkpoint directory itself or the standard run layouts.
fn load_main_checkpoint(run: &Path) -> Result<EncoderBundle> {
    let candidates = [
        run.to_path_buf(),
        run.join("checkpoint"),
        run.join("checkpoints/stage2"),
        run.join("checkpoints/stage1"),
        run.join("checkpoints/pretrained"),
    ];
    for dir in &candidates {
        if dir.join("config.json").exists() {
            return load_bundle(dir);
        }
    }
    Err(Error::format(format!(
        "no model checkpoint found under {}",
        run.display()
    )))
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::SynthData {
            priors,
            dims,
            unlabeled,
            means_scale,
            noise_scale,
            coupling,
            seed,
            out,
        } => {
            if dims.len() != 3 {
                return Err(Error::config("expected exactly 3 dims (v,a,t)"));
            }
            let spec = SyntheticSpec {
                class_priors: parse_priors(&priors)?,
                unlabeled_count: unlabeled,
                means_scale,
                noise_scale,
                cross_modal_coupling: coupling,
                dims: Dims::new(dims[0], dims[1], dims[2]),
                seed,
            };
            let output = generate_synthetic(&spec)?;
            save_feature_store(&output.split, &out)?;
            save_hidden_gold(&out, &output.hidden_gold)?;
            println!(
                "wrote {} train + {} validation + {} unlabeled records to {}",
                output.split.labeled_train.len(),
                output.split.validation.len(),
                output.split.unlabeled.len(),
                out.display()
            );
        }
        Command::Pretrain { data, out, config } => {
            let cfg = config.load()?;
            let split = load_feature_store(&data)?;
            let train_cfg = cfg.train_config();
            let loss_cfg = cfg.contrastive_config();
            let schedule = cfg.noise_schedule()?;
            let mut bundle = EncoderBundle::init(cfg.network_config(split.dims))?;
            let report = pretrain(
                &mut bundle,
                &split.unlabeled,
                schedule.as_ref(),
                &loss_cfg,
                &train_cfg,
            )?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            save_bundle(&bundle, &out.join("checkpoint"))?;
            write_train_report(&out, &report)?;
            println!(
                "pretraining finished: best held-out loss {:.4} at epoch {} ({:?})",
                report.best_value, report.best_epoch, report.stop_reason
            );
        }
        Command::Train {
            stage,
            data,
            out,
            init,
            pseudo,
            baseline,
            oversample,
            config,
        } => {
            let cfg = config.load()?;
            let split = load_feature_store(&data)?;
            let mut train_cfg = cfg.train_config();
            if let Some(spec) = &oversample {
                let targets = parse_oversample(spec)?;
                match stage {
                    1 => train_cfg.oversample_step1 = targets,
                    _ => train_cfg.oversample_step2 = targets,
                }
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

            if baseline {
                let (model, report) = train_baseline(
                    &split.labeled_train,
                    &split.validation,
                    &cfg.baseline_config(split.dims),
                    &train_cfg,
                )?;
                save_baseline(&model, &out.join("checkpoint"))?;
                write_train_report(&out, &report)?;
                println!("baseline trained: validation WAF {:.4}", report.best_value);
                return Ok(());
            }

            let mut bundle = match &init {
                Some(dir) => load_main_checkpoint(dir)?,
                None => EncoderBundle::init(cfg.network_config(split.dims))?,
            };
            let voting = cfg.voting_config();
            let (stage_kind, pseudo_records) = match stage {
                1 => (Stage::One, None),
                _ => {
                    let records = match &pseudo {
                        Some(path) => {
                            let decisions = load_pseudo_labels(path)?;
                            accepted_records(&split.unlabeled, &decisions)?
                        }
                        None => Vec::new(),
                    };
                    (Stage::Two, Some(records))
                }
            };
            let report = train_supervised(
                &mut bundle,
                &split.labeled_train,
                &split.validation,
                stage_kind,
                pseudo_records.as_deref(),
                &train_cfg,
                &voting,
                None,
            )?;
            save_bundle(&bundle, &out.join("checkpoint"))?;
            write_train_report(&out, &report)?;
            println!(
                "stage {stage} trained: validation WAF {:.4} at epoch {}",
                report.best_value, report.best_epoch
            );
        }
        Command::PseudoLabel {
            main,
            baseline,
            data,
            policy,
            out,
            config,
        } => {
            let cfg = config.load()?;
            if policy != "default" {
                return Err(Error::config(format!(
                    "unknown policy `{policy}`; use `default` (class thresholds come from the config file)"
                )));
            }
            let split = load_feature_store(&data)?;
            let bundle = load_main_checkpoint(&main)?;
            let baseline_model = load_baseline(&baseline.join("checkpoint"))
                .or_else(|_| load_baseline(&baseline))?;
            let decisions = generate_pseudo_labels(
                &bundle,
                &cfg.voting_config(),
                &baseline_model,
                &split.unlabeled,
                &cfg.threshold_policy(),
            )?;
            save_pseudo_labels(&decisions, &out)?;
            let summary = pseudo_label_summary(&decisions);
            println!(
                "wrote {} decisions ({} accepted) to {}",
                decisions.len(),
                summary.total(),
                out.display()
            );
            for (label, count) in summary.as_map() {
                println!("  {label}: {count}");
            }
        }
        Command::Predict {
            run,
            data,
            split,
            out,
            config,
        } => {
            let cfg = config.load()?;
            let store = load_feature_store(&data)?;
            let records = split_records(&store, &split)?;
            let bundle = load_main_checkpoint(&run)?;
            let refs: Vec<&FeatureRecord> = records.iter().collect();
            let labels = predict_labels(&bundle, &cfg.voting_config(), &refs)?;
            let rows: Vec<(String, EmotionLabel)> = refs
                .iter()
                .zip(labels)
                .map(|(r, l)| (r.id.clone(), l))
                .collect();
            write_predictions_csv(&out, &rows)?;
            println!("wrote {} predictions to {}", rows.len(), out.display());
        }
        Command::Evaluate { pred, gold, out } => {
            let predictions = read_predictions_csv(&pred)?;
            let store = load_feature_store(&gold)?;
            let report = evaluate_predictions(&predictions, &store.validation)?;
            let body = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::format(format!("serializing eval report: {e}")))?;
            std::fs::write(&out, body).map_err(|e| Error::io(&out, e))?;
            println!("WAF {:.4} over {} samples -> {}", report.waf, report.n, out.display());
        }
        Command::Run {
            out,
            skip,
            data,
            config,
        } => {
            let mut cfg = config.load()?;
            if let Some(data) = data {
                cfg.data.source = DataSource::Store;
                cfg.data.path = Some(data.to_string_lossy().into_owned());
            }
            let toggles: Vec<Toggle> = skip
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| Toggle::from_str(s))
                .collect::<Result<_>>()?;
            let skips = SkipSet::from_toggles(&toggles);
            let outcome = run_full_pipeline(&cfg, &out, &skips)?;
            println!("pipeline complete: WAF {:.4}", outcome.report.waf);
            for stage in &outcome.manifest.stages {
                println!("  {:<12} {}", stage.name, stage.status);
            }
            println!("report: {}", out.join("report.json").display());
        }
        Command::Ablate {
            toggles,
            out,
            data,
            config,
        } => {
            let mut cfg = config.load()?;
            if let Some(data) = data {
                cfg.data.source = DataSource::Store;
                cfg.data.path = Some(data.to_string_lossy().into_owned());
            }
            let toggles: Vec<Toggle> = toggles
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| Toggle::from_str(s))
                .collect::<Result<_>>()?;
            let table = ablate(&cfg, &toggles, &out)?;
            print!("{}", table.render_text());
        }
        Command::Report { run } => {
            let written = render_run_plots(&run)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = std::error::Error::source(cause);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
