use mia_core::attack::{
    speaker_training_pairs, train_speaker_attack, train_utterance_attack, utterance_mean_loss,
    utterance_training_examples, NetShape, OptimizerConfig, Parameters, TrainConfig, UtteranceNet,
};
use mia_core::pseudo_label::PseudoLabelSet;
use mia_core::scoring::Level;
use mia_core::store::{Dataset, FeatureSequence, Frames, Manifest, ManifestEntry, Membership};
use mia_core::Error;

/// `(utterance_id, speaker_id, frames)` triples to a dataset.
fn dataset(items: &[(&str, &str, Vec<Vec<f64>>)]) -> Dataset {
    let entries = items
        .iter()
        .map(|(u, s, _)| ManifestEntry {
            utterance_id: u.to_string(),
            speaker_id: s.to_string(),
            path: format!("{u}.miaf"),
            membership: Membership::Unknown,
        })
        .collect();
    let sequences = items
        .iter()
        .map(|(u, s, f)| FeatureSequence::new(*u, *s, Frames::from_rows(f).unwrap()))
        .collect();
    let manifest = Manifest {
        root: Default::default(),
        meta: None,
        entries,
    };
    Dataset::from_parts(manifest, sequences).unwrap()
}

fn labels(level: Level, pos: &[&str], neg: &[&str]) -> PseudoLabelSet {
    PseudoLabelSet {
        level,
        k: pos.len(),
        positives: pos.iter().map(|s| s.to_string()).collect(),
        negatives: neg.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn separable_toy_loss_decreases() {
    let ds = dataset(&[("p", "s", vec![vec![1.0, 0.5]]), ("n", "s", vec![vec![-1.0, 0.2]])]);
    let set = labels(Level::Utterance, &["p"], &["n"]);
    let cfg = TrainConfig {
        epochs: 200,
        learning_rate: 1e-2,
        seed: 5,
        ..TrainConfig::default()
    };
    let shape = NetShape { p: 8, r: 8 };
    let examples = utterance_training_examples(&ds, &set).unwrap();
    let (trained, report) = train_utterance_attack(&ds, &set, shape, &cfg).unwrap();
    let (initial, _) = train_utterance_attack(
        &ds,
        &set,
        shape,
        &TrainConfig {
            epochs: 1,
            learning_rate: 1e-300,
            ..cfg
        },
    )
    .unwrap();
    let before = utterance_mean_loss(&initial, &examples).unwrap();
    let after = utterance_mean_loss(&trained, &examples).unwrap();
    assert!(after < before, "{after} >= {before}");
    assert_eq!(report.epoch_losses.len(), 200);
    assert!(report.epoch_losses[199] < report.epoch_losses[0]);
}

#[test]
fn sgd_also_descends() {
    let ds = dataset(&[("p", "s", vec![vec![1.0, 0.5]]), ("n", "s", vec![vec![-1.0, 0.2]])]);
    let set = labels(Level::Utterance, &["p"], &["n"]);
    let cfg = TrainConfig {
        epochs: 200,
        learning_rate: 0.1,
        optimizer: OptimizerConfig::Sgd,
        ..TrainConfig::default()
    };
    let (_, report) = train_utterance_attack(&ds, &set, NetShape { p: 4, r: 4 }, &cfg).unwrap();
    assert!(report.epoch_losses[199] < report.epoch_losses[0]);
}

#[test]
fn training_is_deterministic_under_seed() {
    let ds = dataset(&[
        ("a", "A", vec![vec![1.0, 0.0, 2.0], vec![0.5, 0.5, 0.5]]),
        ("b", "A", vec![vec![0.0, 1.0, 0.0]]),
        (
            "c",
            "B",
            vec![vec![2.0, 1.0, 0.0], vec![1.0, 1.0, 1.0], vec![0.0, 0.0, 1.0]],
        ),
        ("d", "B", vec![vec![-1.0, 0.0, 1.0]]),
    ]);
    let set = labels(Level::Utterance, &["a", "c"], &["b", "d"]);
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 3,
        seed: 42,
        ..TrainConfig::default()
    };
    let shape = NetShape { p: 6, r: 5 };
    let (x, rx) = train_utterance_attack(&ds, &set, shape, &cfg).unwrap();
    let (y, ry) = train_utterance_attack(&ds, &set, shape, &cfg).unwrap();
    let bits = |n: &UtteranceNet| n.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&x), bits(&y));
    assert_eq!(rx, ry);
    let (z, _) = train_utterance_attack(&ds, &set, shape, &TrainConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(bits(&x), bits(&z));

    let spk = labels(Level::Speaker, &["A"], &["B"]);
    let (s1, _) = train_speaker_attack(&ds, &spk, shape, &cfg).unwrap();
    let (s2, _) = train_speaker_attack(&ds, &spk, shape, &cfg).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn speaker_pairs_are_counted_per_speaker() {
    let one = vec![vec![1.0, 2.0]];
    let ds = dataset(&[
        ("a1", "A", one.clone()),
        ("a2", "A", one.clone()),
        ("a3", "A", one.clone()),
        ("b1", "B", one.clone()),
        ("b2", "B", one.clone()),
    ]);
    let pairs = speaker_training_pairs(&ds, &labels(Level::Speaker, &["A"], &["B"])).unwrap();
    let pos = pairs.iter().filter(|p| p.2 == 1.0).count();
    let neg = pairs.iter().filter(|p| p.2 == 0.0).count();
    assert_eq!((pos, neg), (3, 1));
}

#[test]
fn bad_inputs_fail_before_training() {
    let one = vec![vec![1.0, 2.0]];
    let ds = dataset(&[
        ("a1", "A", one.clone()),
        ("b1", "B", one.clone()),
        ("b2", "B", one.clone()),
    ]);
    let cfg = TrainConfig::default();
    let shape = NetShape::default();

    let err = train_speaker_attack(&ds, &labels(Level::Speaker, &["A"], &["B"]), shape, &cfg).unwrap_err();
    assert!(
        matches!(err, Error::InsufficientPairs { ref speaker_id, utterances: 1 } if speaker_id == "A"),
        "{err}"
    );

    let err = train_utterance_attack(&ds, &labels(Level::Utterance, &["a1"], &["zz"]), shape, &cfg).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err}");

    let err = train_utterance_attack(&ds, &labels(Level::Speaker, &["A"], &["B"]), shape, &cfg).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");

    let err = train_utterance_attack(
        &ds,
        &labels(Level::Utterance, &["a1"], &["b1"]),
        shape,
        &TrainConfig { epochs: 0, ..cfg },
    )
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}
