//! Improved attacks: attack networks with hand-derived gradients, trained on
//! pseudo-labels with binary cross-entropy.

mod checkpoint;
mod loss;
mod nets;
mod optim;
mod pooling;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use loss::{bce_grad, bce_loss, sigmoid, softplus};
pub use nets::{improved_speaker_score, improved_utterance_score, NetShape, Parameters, SpeakerNet, UtteranceNet};
pub use optim::{Optimizer, OptimizerConfig};
pub use pooling::{AttentivePooling, PoolingCache};
pub use train::{
    speaker_mean_loss, speaker_training_pairs, train_speaker_attack, train_utterance_attack, utterance_mean_loss,
    utterance_training_examples, TrainConfig, TrainReport,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scoring::{Level, ScoreOutcome, ScoreRow, ScoreTable, Skipped};
use crate::store::{Dataset, Frames, Membership};

/// A trained network of either level.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackModel {
    Utterance(UtteranceNet),
    Speaker(SpeakerNet),
}

impl AttackModel {
    pub fn level(&self) -> Level {
        match self {
            AttackModel::Utterance(_) => Level::Utterance,
            AttackModel::Speaker(_) => Level::Speaker,
        }
    }

    pub fn q(&self) -> usize {
        match self {
            AttackModel::Utterance(n) => n.q(),
            AttackModel::Speaker(n) => n.q(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AttackModel::Utterance(n) => n.validate(),
            AttackModel::Speaker(n) => n.validate(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            AttackModel::Utterance(n) => n.to_flat(),
            AttackModel::Speaker(n) => n.to_flat(),
        }
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        match self {
            AttackModel::Utterance(n) => n.set_flat(flat),
            AttackModel::Speaker(n) => n.set_flat(flat),
        }
    }
}

fn is_skippable(e: &Error) -> bool {
    matches!(e, Error::TooFewFrames { .. } | Error::TooFewUtterances { .. })
}

/// Scores every utterance or speaker of `dataset` with a trained network.
/// Same row order and skip accounting as [`crate::scoring::score_dataset`].
pub fn score_dataset_improved(dataset: &Dataset, model: &AttackModel) -> Result<ScoreOutcome> {
    if let Some(q) = dataset.dim() {
        if q != model.q() {
            return Err(Error::Config(format!(
                "dataset has q={q}, network expects q={}",
                model.q()
            )));
        }
    }
    let results: Vec<(String, Membership, Result<f64>)> = match model {
        AttackModel::Utterance(net) => dataset
            .entries()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(e, s)| {
                (
                    e.utterance_id.clone(),
                    e.membership,
                    improved_utterance_score(net, &s.frames),
                )
            })
            .collect(),
        AttackModel::Speaker(net) => dataset
            .speaker_groups()
            .into_par_iter()
            .map(|g| {
                let frames: Vec<&Frames> = g.sequences.iter().map(|s| &s.frames).collect();
                (
                    g.speaker_id.to_string(),
                    g.membership,
                    improved_speaker_score(net, &frames),
                )
            })
            .collect(),
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (id, membership, res) in results {
        match res {
            Ok(score) => rows.push(ScoreRow { id, score, membership }),
            Err(e) if is_skippable(&e) => skipped.push(Skipped {
                id,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(ScoreOutcome {
        table: ScoreTable::new(model.level(), rows)?,
        skipped,
    })
}
