use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::nets::{NetShape, Parameters, SpeakerNet, UtteranceNet};
use super::optim::{Optimizer, OptimizerConfig};
use crate::error::{Error, Result};
use crate::pseudo_label::PseudoLabelSet;
use crate::scoring::Level;
use crate::seeds::{derive_seed, Stage};
use crate::store::{Dataset, Frames};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    20
}

fn default_learning_rate() -> f64 {
    1e-5
}

fn default_batch_size() -> usize {
    32
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            optimizer: OptimizerConfig::default(),
            batch_size: default_batch_size(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean training loss, measured on each batch before its update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch loop shared by both networks. `accumulate(net, i, grads)`
/// adds example `i`'s gradient and returns its loss.
fn fit<N, F>(mut net: N, examples: usize, cfg: &TrainConfig, mut accumulate: F) -> Result<(N, TrainReport)>
where
    N: Parameters,
    F: FnMut(&N, usize, &mut N) -> Result<f64>,
{
    let shapes: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, &shapes);
    let mut shuffle_rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, Stage::Shuffle));
    let mut order: Vec<usize> = (0..examples).collect();
    let mut report = TrainReport::default();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = net.zeroed();
            for &i in batch {
                epoch_loss += accumulate(&net, i, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(net.tensors_mut(), grads.tensors());
        }
        report.epoch_losses.push(epoch_loss / examples as f64);
    }
    Ok((net, report))
}

fn check_level(labels: &PseudoLabelSet, level: Level) -> Result<()> {
    labels.validate()?;
    if labels.level != level {
        return Err(Error::Config(format!(
            "pseudo-labels are {}-level, expected {level}",
            labels.level
        )));
    }
    Ok(())
}

fn dataset_dim(dataset: &Dataset) -> Result<usize> {
    dataset.dim().ok_or_else(|| Error::Data("dataset is empty".into()))
}

/// Utterance-level training examples `(frames, label)`, positives first.
pub fn utterance_training_examples<'a>(
    dataset: &'a Dataset,
    labels: &PseudoLabelSet,
) -> Result<Vec<(&'a Frames, f64)>> {
    check_level(labels, Level::Utterance)?;
    labels
        .examples()
        .map(|(id, label)| {
            let seq = dataset
                .get(id)
                .ok_or_else(|| Error::Data(format!("no features for pseudo-labeled utterance {id:?}")))?;
            if seq.frames.is_empty() {
                return Err(Error::Data(format!("utterance {id:?} has no frames")));
            }
            Ok((&seq.frames, label))
        })
        .collect()
}

/// Speaker-level training pairs: every unordered utterance pair within each
/// pseudo-seen speaker (label 1) and each pseudo-unseen speaker (label 0).
pub fn speaker_training_pairs<'a>(
    dataset: &'a Dataset,
    labels: &PseudoLabelSet,
) -> Result<Vec<(&'a Frames, &'a Frames, f64)>> {
    check_level(labels, Level::Speaker)?;
    let groups = dataset.speaker_groups();
    let mut pairs = Vec::new();
    for (speaker, label) in labels.examples() {
        let group = groups
            .iter()
            .find(|g| g.speaker_id == speaker)
            .ok_or_else(|| Error::Data(format!("no utterances for pseudo-labeled speaker {speaker:?}")))?;
        if group.len() < 2 {
            return Err(Error::InsufficientPairs {
                speaker_id: speaker.to_string(),
                utterances: group.len(),
            });
        }
        if let Some(s) = group.sequences.iter().find(|s| s.frames.is_empty()) {
            return Err(Error::Data(format!("utterance {:?} has no frames", s.utterance_id)));
        }
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                pairs.push((&group.sequences[i].frames, &group.sequences[j].frames, label));
            }
        }
    }
    Ok(pairs)
}

/// Trains the utterance network for exactly `cfg.epochs` passes over the
/// pseudo-labeled utterances. All data is resolved before the first step.
pub fn train_utterance_attack(
    dataset: &Dataset,
    labels: &PseudoLabelSet,
    shape: NetShape,
    cfg: &TrainConfig,
) -> Result<(UtteranceNet, TrainReport)> {
    cfg.validate()?;
    let examples = utterance_training_examples(dataset, labels)?;
    let q = dataset_dim(dataset)?;
    let mut init_rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, Stage::Init));
    let net = UtteranceNet::init(q, shape, &mut init_rng);
    fit(net, examples.len(), cfg, |net, i, grads| {
        let (frames, label) = examples[i];
        net.accumulate_gradient(frames, label, grads)
    })
}

/// Trains the speaker network on within-speaker utterance pairs.
pub fn train_speaker_attack(
    dataset: &Dataset,
    labels: &PseudoLabelSet,
    shape: NetShape,
    cfg: &TrainConfig,
) -> Result<(SpeakerNet, TrainReport)> {
    cfg.validate()?;
    let pairs = speaker_training_pairs(dataset, labels)?;
    let q = dataset_dim(dataset)?;
    let mut init_rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, Stage::Init));
    let net = SpeakerNet::init(q, shape, &mut init_rng);
    fit(net, pairs.len(), cfg, |net, i, grads| {
        let (a, b, label) = pairs[i];
        net.accumulate_gradient(a, b, label, grads)
    })
}

/// Mean BCE of an utterance network over labeled examples.
pub fn utterance_mean_loss(net: &UtteranceNet, examples: &[(&Frames, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for &(f, y) in examples {
        total += net.loss(f, y)?;
    }
    Ok(total / examples.len() as f64)
}

/// Mean BCE of a speaker network over labeled pairs.
pub fn speaker_mean_loss(net: &SpeakerNet, pairs: &[(&Frames, &Frames, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for &(a, b, y) in pairs {
        total += net.loss(a, b, y)?;
    }
    Ok(total / pairs.len() as f64)
}
