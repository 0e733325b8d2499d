//! Subcommand bodies and the end-to-end pipeline.
//!
//! Every `cmd_*` writes its artifacts into the directory it is given, using
//! the fixed file names below. [`cmd_pipeline`] is literally the composition
//! of the other commands, each run in its own subdirectory:
//!
//! ```text
//! out/data/        manifest.ndjson, features/   (only with a synth section)
//! out/basic/       scores.csv, skipped.json, report.json, roc.csv
//! out/aux/         scores.csv, skipped.json      (only with aux_manifest)
//! out/labels/      pseudo_labels.json
//! out/train/       model.miac, train_report.json
//! out/improved/    scores.csv, skipped.json, report.json, roc.csv
//! out/summary.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{
    load_checkpoint, save_checkpoint, score_dataset_improved, train_speaker_attack, train_utterance_attack,
    AttackModel, NetShape, TrainConfig, TrainReport,
};
use crate::error::{Error, Result};
use crate::eval::{emit_report, evaluate, EvalReport, OperatingPoint, DEFAULT_FPR_TARGETS};
use crate::pseudo_label::{scaled_k, select, PseudoLabelSet};
use crate::scoring::{score_dataset, Level, Metric, ScoreOutcome, ScoreTable};
use crate::store::{Dataset, Manifest};
use crate::synth::{generate, SynthConfig};

pub const MANIFEST_FILE: &str = "manifest.ndjson";
pub const SCORES_FILE: &str = "scores.csv";
pub const SKIPPED_FILE: &str = "skipped.json";
pub const LABELS_FILE: &str = "pseudo_labels.json";
pub const CHECKPOINT_FILE: &str = "model.miac";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FAILED_MARKER: &str = ".failed";

/// Run configuration shared by all subcommands. Every field is optional in
/// JSON; relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Pool under attack (ground-truth membership used only for evaluation).
    pub manifest: Option<PathBuf>,
    /// Separate pool for pseudo-labels and training. Defaults to `manifest`.
    pub aux_manifest: Option<PathBuf>,
    /// Generate the attacked pool instead of reading `manifest`.
    pub synth: Option<SynthConfig>,
    pub level: Level,
    pub metric: Metric,
    /// Pseudo-labels per class. Defaults to [`scaled_k`] of the pool size.
    pub k: Option<usize>,
    pub train: TrainConfig,
    pub net: NetShape,
    pub fpr_targets: Vec<f64>,
    /// Base seed; overrides `synth.seed` and `train.seed`.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: None,
            aux_manifest: None,
            synth: None,
            level: Level::Utterance,
            metric: Metric::Cosine,
            k: None,
            train: TrainConfig::default(),
            net: NetShape::default(),
            fpr_targets: DEFAULT_FPR_TARGETS.to_vec(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.aux_manifest].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Field checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.k == Some(0) {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if let Some(t) = self.fpr_targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Config(format!("FPR target {t} outside [0, 1]")));
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        if self.net.p == 0 || self.net.r == 0 {
            return Err(Error::Config("network widths p and r must be at least 1".into()));
        }
        self.train.validate()
    }

    /// Checks that the pipeline has exactly one source for the attacked pool
    /// and that referenced files exist.
    pub fn validate_for_pipeline(&self) -> Result<()> {
        self.validate()?;
        match (&self.manifest, &self.synth) {
            (Some(_), Some(_)) => return Err(Error::Config("set either manifest or synth, not both".into())),
            (None, None) => return Err(Error::Config("set manifest or synth".into())),
            _ => {}
        }
        for p in [&self.manifest, &self.aux_manifest].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("manifest {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Per-run AUC summary written by [`cmd_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub level: Level,
    pub metric: Metric,
    pub k: usize,
    pub basic_auc: f64,
    pub improved_auc: f64,
    pub basic_tpr_at: Vec<OperatingPoint>,
    pub improved_tpr_at: Vec<OperatingPoint>,
    /// `"target"` when pseudo-labels come from the attacked pool itself,
    /// `"auxiliary"` when `aux_manifest` supplied a separate pool.
    pub pseudo_label_pool: String,
    pub pseudo_label_pool_size: usize,
    pub seed: u64,
    pub final_train_loss: f64,
}

/// Single-line JSON rendering of an error: `{"error": kind, "message": text}`.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

/// Creates `dir`, or empties it when `overwrite` is set. A non-empty
/// directory without `overwrite` is refused untouched.
pub fn prepare_output_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::Config(format!("{} is not a directory", dir.display())));
        }
        let entries: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(dir, e))?;
        if !entries.is_empty() && !overwrite {
            return Err(Error::Config(format!(
                "output directory {} is not empty (use --overwrite)",
                dir.display()
            )));
        }
        for entry in entries {
            let path = entry.path();
            let res = if path.is_dir() {
                fs::remove_dir_all(&path)
            } else {
                fs::remove_file(&path)
            };
            res.map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    } else {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
    }
}

/// Prepares `dir`, runs `f` in it and drops a [`FAILED_MARKER`] holding the
/// error line if `f` fails.
pub fn run_in_output_dir<T>(dir: &Path, overwrite: bool, f: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    prepare_output_dir(dir, overwrite)?;
    f(dir).inspect_err(|e| {
        let _ = fs::write(dir.join(FAILED_MARKER), error_line(e) + "\n");
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_scores(outcome: &ScoreOutcome, out: &Path) -> Result<()> {
    outcome.table.write_csv(out.join(SCORES_FILE))?;
    write_json(&out.join(SKIPPED_FILE), &outcome.skipped)
}

/// Generates a synthetic pool into `out`.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<Manifest> {
    ensure_dir(out)?;
    generate(cfg, out)
}

/// Basic attack: writes `scores.csv` and `skipped.json`.
pub fn cmd_score(manifest: &Path, level: Level, metric: Metric, out: &Path) -> Result<ScoreOutcome> {
    ensure_dir(out)?;
    let dataset = Dataset::open(manifest)?;
    let outcome = score_dataset(&dataset, level, metric)?;
    write_scores(&outcome, out)?;
    Ok(outcome)
}

/// Selects pseudo-labels from a score table: writes `pseudo_labels.json`.
pub fn cmd_pseudo_label(scores: &Path, level: Level, k: Option<usize>, out: &Path) -> Result<PseudoLabelSet> {
    ensure_dir(out)?;
    let table = ScoreTable::read_csv(level, scores)?;
    let k = k.unwrap_or_else(|| scaled_k(level, table.len()));
    let labels = select(&table, k)?;
    labels.write(out.join(LABELS_FILE))?;
    Ok(labels)
}

/// Trains the attack network for the labels' level: writes `model.miac` and
/// `train_report.json`.
pub fn cmd_train(
    manifest: &Path,
    labels: &Path,
    shape: NetShape,
    cfg: &TrainConfig,
    out: &Path,
) -> Result<(AttackModel, TrainReport)> {
    ensure_dir(out)?;
    let labels = PseudoLabelSet::read(labels)?;
    let dataset = Dataset::open(manifest)?;
    let (model, report) = match labels.level {
        Level::Utterance => {
            let (net, report) = train_utterance_attack(&dataset, &labels, shape, cfg)?;
            (AttackModel::Utterance(net), report)
        }
        Level::Speaker => {
            let (net, report) = train_speaker_attack(&dataset, &labels, shape, cfg)?;
            (AttackModel::Speaker(net), report)
        }
    };
    save_checkpoint(out.join(CHECKPOINT_FILE), &model, Some(cfg))?;
    write_json(&out.join(TRAIN_REPORT_FILE), &report)?;
    Ok((model, report))
}

/// Improved attack: scores a pool with a trained checkpoint, writes
/// `scores.csv` and `skipped.json`.
pub fn cmd_infer(checkpoint: &Path, manifest: &Path, out: &Path) -> Result<ScoreOutcome> {
    ensure_dir(out)?;
    let (model, _) = load_checkpoint(checkpoint)?;
    let dataset = Dataset::open(manifest)?;
    let outcome = score_dataset_improved(&dataset, &model)?;
    write_scores(&outcome, out)?;
    Ok(outcome)
}

/// Evaluates a labeled score table: writes `report.json` and `roc.csv`.
pub fn cmd_evaluate(scores: &Path, level: Level, fpr_targets: &[f64], out: &Path) -> Result<EvalReport> {
    ensure_dir(out)?;
    let table = ScoreTable::read_csv(level, scores)?;
    let report = evaluate(&table, fpr_targets)?;
    emit_report(&report, out)?;
    Ok(report)
}

/// Basic attack, pseudo-labeling, training, improved attack and both
/// evaluations, then `summary.json`.
pub fn cmd_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<Summary> {
    cfg.validate_for_pipeline()?;
    let level = cfg.level;
    let target = match (&cfg.synth, &cfg.manifest) {
        (Some(synth), _) => {
            let synth = SynthConfig {
                seed: cfg.seed,
                ..synth.clone()
            };
            let dir = out.join("data");
            cmd_synth(&synth, &dir)?;
            dir.join(MANIFEST_FILE)
        }
        (None, Some(manifest)) => manifest.clone(),
        (None, None) => unreachable!("checked by validate_for_pipeline"),
    };

    let basic_dir = out.join("basic");
    cmd_score(&target, level, cfg.metric, &basic_dir)?;
    let basic = cmd_evaluate(&basic_dir.join(SCORES_FILE), level, &cfg.fpr_targets, &basic_dir)?;

    let (pool_name, pool_manifest, pool_scores) = match &cfg.aux_manifest {
        Some(aux) => {
            let aux_dir = out.join("aux");
            cmd_score(aux, level, cfg.metric, &aux_dir)?;
            ("auxiliary", aux.clone(), aux_dir.join(SCORES_FILE))
        }
        None => ("target", target.clone(), basic_dir.join(SCORES_FILE)),
    };
    let labels_dir = out.join("labels");
    let labels = cmd_pseudo_label(&pool_scores, level, cfg.k, &labels_dir)?;
    let pool_size = ScoreTable::read_csv(level, &pool_scores)?.len();

    let train = TrainConfig {
        seed: cfg.seed,
        ..cfg.train
    };
    let train_dir = out.join("train");
    let (_, report) = cmd_train(
        &pool_manifest,
        &labels_dir.join(LABELS_FILE),
        cfg.net,
        &train,
        &train_dir,
    )?;

    let improved_dir = out.join("improved");
    cmd_infer(&train_dir.join(CHECKPOINT_FILE), &target, &improved_dir)?;
    let improved = cmd_evaluate(&improved_dir.join(SCORES_FILE), level, &cfg.fpr_targets, &improved_dir)?;

    let summary = Summary {
        level,
        metric: cfg.metric,
        k: labels.k,
        basic_auc: basic.auc,
        improved_auc: improved.auc,
        basic_tpr_at: basic.tpr_at,
        improved_tpr_at: improved.tpr_at,
        pseudo_label_pool: pool_name.to_string(),
        pseudo_label_pool_size: pool_size,
        seed: cfg.seed,
        final_train_loss: report.epoch_losses.last().copied().unwrap_or(f64::NAN),
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}
