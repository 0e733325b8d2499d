//! Synthetic feature datasets with a tunable membership signal.
//!
//! Hierarchical Gaussian sampling, per speaker `s` and utterance `u`:
//!
//! ```text
//! centroid      mu_s  ~ N(0, sigma_c^2 I)
//! utterance     mu_su = mu_s + N(0, sigma_u(class)^2 I)
//! frame         h_t   = mu_su + N(0, sigma_f(class)^2 I)
//! ```
//!
//! Unseen speakers always use the unseen scales. Seen scales interpolate as
//! `(1 - g) * unseen + g * seen` with `g = separability`, so both classes
//! coincide at `g = 0`. The defaults give seen utterances more frame
//! dispersion (higher utterance score) and seen speakers tighter utterance
//! means (higher speaker score).
//!
//! Randomness: one ChaCha20 stream seeded with the `Synth` sub-seed of
//! `seed`, standard normals from `rand_distr::StandardNormal`. Draw order:
//! speakers (seen, then unseen), per speaker the centroid, then per
//! utterance the frame count (if a range), the offset and the frames in
//! row-major order.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{derive_seed, Stage};
use crate::store::{
    write_feature_file, Dataset, FeatureSequence, Frames, Manifest, ManifestEntry, ManifestMeta, Membership,
};

/// Fixed frame count or an inclusive range sampled uniformly per utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameCount {
    Fixed(usize),
    Range { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub q: usize,
    pub num_speakers_seen: usize,
    pub num_speakers_unseen: usize,
    pub utterances_per_speaker: usize,
    pub frames_per_utterance: FrameCount,
    /// Signal strength in `[0, 1]`.
    pub separability: f64,
    pub centroid_scale: f64,
    pub utterance_scale_seen: f64,
    pub utterance_scale_unseen: f64,
    pub frame_scale_seen: f64,
    pub frame_scale_unseen: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            q: 32,
            num_speakers_seen: 20,
            num_speakers_unseen: 20,
            utterances_per_speaker: 10,
            frames_per_utterance: FrameCount::Fixed(50),
            separability: 1.0,
            centroid_scale: 1.0,
            utterance_scale_seen: 0.05,
            utterance_scale_unseen: 0.5,
            frame_scale_seen: 1.0,
            frame_scale_unseen: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config("q must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.separability) {
            return Err(Error::Config(format!(
                "separability {} outside [0, 1]",
                self.separability
            )));
        }
        let scales = [
            ("centroid_scale", self.centroid_scale),
            ("utterance_scale_seen", self.utterance_scale_seen),
            ("utterance_scale_unseen", self.utterance_scale_unseen),
            ("frame_scale_seen", self.frame_scale_seen),
            ("frame_scale_unseen", self.frame_scale_unseen),
        ];
        for (name, v) in scales {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let FrameCount::Range { min, max } = self.frames_per_utterance {
            if min > max {
                return Err(Error::Config(format!("frame range {min}..={max} is empty")));
            }
        }
        Ok(())
    }

    /// `(utterance scale, frame scale)` for a class at the configured separability.
    pub fn scales(&self, membership: Membership) -> (f64, f64) {
        let g = self.separability;
        let lerp = |unseen: f64, seen: f64| (1.0 - g) * unseen + g * seen;
        match membership {
            Membership::Seen => (
                lerp(self.utterance_scale_unseen, self.utterance_scale_seen),
                lerp(self.frame_scale_unseen, self.frame_scale_seen),
            ),
            _ => (self.utterance_scale_unseen, self.frame_scale_unseen),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<SynthConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: SynthConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn normal_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Samples the dataset in memory. Values are rounded to `f32` so the
/// in-memory dataset equals what the feature files hold.
pub fn sample(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, Stage::Synth));
    let q = cfg.q;
    let classes = [
        (Membership::Seen, cfg.num_speakers_seen),
        (Membership::Unseen, cfg.num_speakers_unseen),
    ];
    let mut entries = Vec::new();
    let mut sequences = Vec::new();
    let mut speaker_index = 0;
    for (membership, count) in classes {
        let (utt_scale, frame_scale) = cfg.scales(membership);
        for _ in 0..count {
            let speaker_id = format!("spk{speaker_index:04}");
            speaker_index += 1;
            let centroid = normal_vec(&mut rng, q, cfg.centroid_scale);
            for u in 0..cfg.utterances_per_speaker {
                let m = match cfg.frames_per_utterance {
                    FrameCount::Fixed(m) => m,
                    FrameCount::Range { min, max } => rng.random_range(min..=max),
                };
                let mean: Vec<f64> = centroid
                    .iter()
                    .zip(normal_vec(&mut rng, q, utt_scale))
                    .map(|(c, o)| c + o)
                    .collect();
                let mut data = Vec::with_capacity(m * q);
                for _ in 0..m {
                    for mu in &mean {
                        let noise: f64 = rng.sample(StandardNormal);
                        data.push((mu + frame_scale * noise) as f32 as f64);
                    }
                }
                let utterance_id = format!("{speaker_id}_utt{u:03}");
                entries.push(ManifestEntry {
                    utterance_id: utterance_id.clone(),
                    speaker_id: speaker_id.clone(),
                    path: format!("features/{utterance_id}.miaf"),
                    membership,
                });
                sequences.push(FeatureSequence::new(
                    utterance_id,
                    &speaker_id,
                    Frames::new(m, q, data)?,
                ));
            }
        }
    }
    let manifest = Manifest {
        root: Default::default(),
        meta: Some(ManifestMeta {
            q: Some(q),
            extra: [("source".to_string(), serde_json::Value::String("synthetic".into()))]
                .into_iter()
                .collect(),
        }),
        entries,
    };
    Dataset::from_parts(manifest, sequences)
}

/// Generates a dataset under `out_dir`: `manifest.ndjson` plus one MIAF
/// file per utterance in `features/`. Returns the manifest rooted at `out_dir`.
pub fn generate(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let dataset = sample(cfg)?;
    let features = out_dir.join("features");
    fs::create_dir_all(&features).map_err(|e| Error::io(&features, e))?;
    let mut manifest = dataset.manifest().clone();
    manifest.root = out_dir.to_path_buf();
    for (entry, seq) in dataset.entries() {
        write_feature_file(seq, manifest.resolve(entry))?;
    }
    manifest.write(out_dir.join("manifest.ndjson"))?;
    Ok(manifest)
}
