//! `mia`: command-line front end for the attack engine.
//!
//! Success prints one JSON line describing the artifacts to stdout and exits
//! 0. Failure prints `{"error": kind, "message": text}` to stderr and exits
//! 1 (2 for usage errors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mia_core::pipeline::{
    cmd_evaluate, cmd_infer, cmd_pipeline, cmd_pseudo_label, cmd_score, cmd_synth, cmd_train, error_line,
    run_in_output_dir, PipelineConfig, CHECKPOINT_FILE, LABELS_FILE, SCORES_FILE, SKIPPED_FILE, SUMMARY_FILE,
};
use mia_core::scoring::{Level, Metric, Skipped};
use mia_core::Result;

#[derive(Parser)]
#[command(
    name = "mia",
    version,
    about = "Membership-inference attacks on speech representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config JSON; each subcommand reads the fields it needs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Empty a non-empty output directory instead of refusing it.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pool from the config's `synth` section.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Basic attack scores for every utterance or speaker.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum)]
        level: Option<Level>,
        #[arg(long, value_enum)]
        metric: Option<Metric>,
    },
    /// Pick the top and bottom `k` scores as pseudo-labels.
    PseudoLabel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum)]
        level: Option<Level>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train the attack network on pseudo-labels.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Improved attack scores from a trained checkpoint.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// ROC, AUC and TPR at low FPR for a labeled score table.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum)]
        level: Option<Level>,
    },
    /// Run every stage and write summary.json.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum)]
        level: Option<Level>,
        #[arg(long, value_enum)]
        metric: Option<Metric>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let cfg = match &common.config {
        Some(path) => PipelineConfig::read(path)?,
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn manifest_arg(flag: Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.manifest.clone())
        .ok_or_else(|| mia_core::Error::Config("no manifest: pass --manifest or set it in --config".into()))
}

fn warn_skipped(skipped: &[Skipped], out: &Path) {
    if !skipped.is_empty() {
        eprintln!(
            "{}",
            json!({
                "warning": "skipped",
                "count": skipped.len(),
                "file": out.join(SKIPPED_FILE),
            })
        );
    }
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Synth { common, seed } => {
            let cfg = load_config(&common)?;
            let mut synth = cfg.synth.unwrap_or_default();
            synth.seed = seed.unwrap_or(cfg.seed);
            let manifest = run_in_output_dir(&common.out, common.overwrite, |out| cmd_synth(&synth, out))?;
            Ok(json!({ "manifest": common.out.join("manifest.ndjson"), "utterances": manifest.len() }))
        }
        Command::Score {
            common,
            manifest,
            level,
            metric,
        } => {
            let cfg = load_config(&common)?;
            let manifest = manifest_arg(manifest, &cfg)?;
            let level = level.unwrap_or(cfg.level);
            let metric = metric.unwrap_or(cfg.metric);
            let outcome = run_in_output_dir(&common.out, common.overwrite, |out| {
                cmd_score(&manifest, level, metric, out)
            })?;
            warn_skipped(&outcome.skipped, &common.out);
            Ok(json!({
                "scores": common.out.join(SCORES_FILE),
                "rows": outcome.table.len(),
                "skipped": outcome.skipped.len(),
            }))
        }
        Command::PseudoLabel {
            common,
            scores,
            level,
            k,
        } => {
            let cfg = load_config(&common)?;
            let level = level.unwrap_or(cfg.level);
            let k = k.or(cfg.k);
            let labels = run_in_output_dir(&common.out, common.overwrite, |out| {
                cmd_pseudo_label(&scores, level, k, out)
            })?;
            Ok(json!({ "labels": common.out.join(LABELS_FILE), "k": labels.k }))
        }
        Command::Train {
            common,
            manifest,
            labels,
            seed,
        } => {
            let cfg = load_config(&common)?;
            let manifest = manifest_arg(manifest, &cfg)?;
            let mut train = cfg.train;
            train.seed = seed.unwrap_or(cfg.seed);
            let (_, report) = run_in_output_dir(&common.out, common.overwrite, |out| {
                cmd_train(&manifest, &labels, cfg.net, &train, out)
            })?;
            Ok(json!({
                "checkpoint": common.out.join(CHECKPOINT_FILE),
                "final_loss": report.epoch_losses.last(),
            }))
        }
        Command::Infer {
            common,
            checkpoint,
            manifest,
        } => {
            let cfg = load_config(&common)?;
            let manifest = manifest_arg(manifest, &cfg)?;
            let outcome = run_in_output_dir(&common.out, common.overwrite, |out| {
                cmd_infer(&checkpoint, &manifest, out)
            })?;
            warn_skipped(&outcome.skipped, &common.out);
            Ok(json!({
                "scores": common.out.join(SCORES_FILE),
                "rows": outcome.table.len(),
                "skipped": outcome.skipped.len(),
            }))
        }
        Command::Evaluate { common, scores, level } => {
            let cfg = load_config(&common)?;
            let level = level.unwrap_or(cfg.level);
            let report = run_in_output_dir(&common.out, common.overwrite, |out| {
                cmd_evaluate(&scores, level, &cfg.fpr_targets, out)
            })?;
            Ok(json!({ "auc": report.auc, "tpr_at": report.tpr_at }))
        }
        Command::Pipeline {
            common,
            manifest,
            level,
            metric,
            k,
            seed,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(m) = manifest {
                cfg.manifest = Some(m);
            }
            cfg.level = level.unwrap_or(cfg.level);
            cfg.metric = metric.unwrap_or(cfg.metric);
            cfg.k = k.or(cfg.k);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let summary = run_in_output_dir(&common.out, common.overwrite, |out| cmd_pipeline(&cfg, out))?;
            let mut v = serde_json::to_value(&summary)?;
            v["summary"] = json!(common.out.join(SUMMARY_FILE));
            Ok(v)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let message = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": message }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
