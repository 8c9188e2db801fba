//! Seeded synthetic datasets with a planted binary label.
//!
//! Each clip draws a label with probability 1/2 and a clip-level emotion
//! profile in logit space: a fixed neutral-dominated base, per-clip jitter
//! that is independent of the label, and a planted offset of
//! `±separability * PLANTED_OFFSET / 2` on every informative emotion (`+` for
//! Engaged). Frames add independent Gaussian noise of scale `temporal_noise`
//! to the clip profile and are mapped onto the probability simplex with a
//! softmax. With separability 0 the features carry no label information.
//!
//! Every clip uses its own ChaCha stream (stream index = clip position), so
//! generation order cannot change the output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ingest::{
    write_feature_stream, write_label_table, write_split_manifest, AffectiveLabels, Clip, Dataset, Emotion,
    EmotionVector, FrameRecord, IngestError, SplitName, EMOTION_COUNT, FEATURES_FILE, LABELS_FILE, SPLITS_FILE,
};

pub const ORACLE_FILE: &str = "oracle.csv";

/// Logit distance between class means of an informative emotion at separability 1.
pub const PLANTED_OFFSET: f64 = 4.0;

/// Standard deviation of the label-independent per-clip logit jitter.
pub const CLIP_SPREAD: f64 = 0.3;

/// Base emotion probabilities before jitter, offsets and noise.
const BASE_PROFILE: [f64; EMOTION_COUNT] = [0.03, 0.52, 0.10, 0.05, 0.12, 0.10, 0.08];

const FRAMES_PER_SECOND: u64 = 30;

/// Stream index reserved for the split permutation.
const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub clip_count: usize,
    pub frames_per_clip: usize,
    /// In `[0, 1]`; scales the planted class offset.
    pub separability: f64,
    pub informative_emotions: BTreeSet<Emotion>,
    /// Per-frame logit noise scale.
    pub temporal_noise: f64,
    /// Probability that a frame has no detected face, in `[0, 1)`.
    pub face_dropout_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            clip_count: 400,
            frames_per_clip: 300,
            separability: 1.0,
            informative_emotions: BTreeSet::from([Emotion::Happy, Emotion::Sad]),
            temporal_noise: 0.1,
            face_dropout_rate: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        if self.clip_count == 0 {
            return bad("clip_count must be positive".into());
        }
        if self.frames_per_clip == 0 {
            return bad("frames_per_clip must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.separability) {
            return bad(format!("separability {} outside [0, 1]", self.separability));
        }
        if !(self.temporal_noise >= 0.0 && self.temporal_noise.is_finite()) {
            return bad(format!("temporal_noise {} must be a non-negative number", self.temporal_noise));
        }
        if !(0.0..1.0).contains(&self.face_dropout_rate) {
            return bad(format!("face_dropout_rate {} outside [0, 1)", self.face_dropout_rate));
        }
        Ok(())
    }
}

/// Generated streams, labels and split together with the true binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub clips: Vec<Clip>,
    pub labels: BTreeMap<String, AffectiveLabels>,
    pub splits: BTreeMap<String, SplitName>,
    pub oracle: BTreeMap<String, u8>,
}

impl SynthDataset {
    pub fn to_dataset(&self) -> Result<Dataset, SynthError> {
        Ok(Dataset::assemble(
            self.clips.clone(),
            self.labels.clone(),
            self.splits.clone(),
        )?)
    }

    /// Write `features.jsonl`, `labels.csv`, `splits.csv` and `oracle.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        let mut features = BufWriter::new(File::create(dir.join(FEATURES_FILE))?);
        write_feature_stream(&self.clips, &mut features)?;
        features.flush()?;
        write_label_table(&self.labels, File::create(dir.join(LABELS_FILE))?)?;
        write_split_manifest(&self.splits, File::create(dir.join(SPLITS_FILE))?)?;
        let mut oracle = csv::Writer::from_path(dir.join(ORACLE_FILE))?;
        oracle.write_record(["ClipID", "Label"])?;
        for (id, y) in &self.oracle {
            oracle.write_record([id.as_str(), &y.to_string()])?;
        }
        oracle.flush()?;
        Ok(())
    }
}

pub fn clip_id(index: usize) -> String {
    format!("synth{index:06}")
}

fn clip_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn softmax(logits: &[f64; EMOTION_COUNT]) -> [f64; EMOTION_COUNT] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|l| (l - max).exp());
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

struct GeneratedClip {
    clip: Clip,
    labels: AffectiveLabels,
    engaged: bool,
}

fn generate_clip(cfg: &SynthConfig, index: usize) -> GeneratedClip {
    let id = clip_id(index);
    let mut rng = clip_rng(cfg.seed, index);
    let engaged = rng.random_bool(0.5);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let sign = if engaged { 1.0 } else { -1.0 };
    let mut profile = BASE_PROFILE.map(f64::ln);
    for (emotion, logit) in Emotion::ALL.iter().zip(profile.iter_mut()) {
        *logit += CLIP_SPREAD * unit.sample(&mut rng);
        if cfg.informative_emotions.contains(emotion) {
            *logit += sign * cfg.separability * PLANTED_OFFSET / 2.0;
        }
    }

    let engagement = if engaged { rng.random_range(2..=3) } else { rng.random_range(0..=1) };
    let labels = AffectiveLabels::new(
        rng.random_range(0..=3),
        engagement,
        rng.random_range(0..=3),
        rng.random_range(0..=3),
    )
    .expect("severities in range");

    let frames = (0..cfg.frames_per_clip as u64)
        .map(|frame_index| {
            let face = !rng.random_bool(cfg.face_dropout_rate);
            let mut logits = profile;
            for l in &mut logits {
                *l += cfg.temporal_noise * unit.sample(&mut rng);
            }
            FrameRecord {
                clip_id: id.clone(),
                frame_index,
                timestamp_ms: frame_index * 1000 / FRAMES_PER_SECOND,
                emotions: face.then(|| EmotionVector::new(softmax(&logits), true).expect("softmax lies on the simplex")),
            }
        })
        .collect();
    GeneratedClip {
        clip: Clip { clip_id: id, frames },
        labels,
        engaged,
    }
}

/// Assign 70% of clips to train, 10% to validation and the rest to test
/// after a seeded permutation.
fn assign_splits(cfg: &SynthConfig) -> BTreeMap<String, SplitName> {
    let n = cfg.clip_count;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut clip_rng(cfg.seed, SPLIT_STREAM as usize));
    let n_train = (n * 7).div_ceil(10);
    let n_val = (n / 10).min(n - n_train);
    order
        .into_iter()
        .enumerate()
        .map(|(pos, idx)| {
            let split = if pos < n_train {
                SplitName::Train
            } else if pos < n_train + n_val {
                SplitName::Validation
            } else {
                SplitName::Test
            };
            (clip_id(idx), split)
        })
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset, SynthError> {
    cfg.validate()?;
    let mut out = SynthDataset {
        clips: Vec::with_capacity(cfg.clip_count),
        labels: BTreeMap::new(),
        splits: assign_splits(cfg),
        oracle: BTreeMap::new(),
    };
    for index in 0..cfg.clip_count {
        let g = generate_clip(cfg, index);
        out.labels.insert(g.clip.clip_id.clone(), g.labels);
        out.oracle.insert(g.clip.clip_id.clone(), u8::from(g.engaged));
        out.clips.push(g.clip);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{apply_policy, PolicyId};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            clip_count: 50,
            frames_per_clip: 40,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(&small(3)).unwrap(), generate(&small(3)).unwrap());
        assert_ne!(generate(&small(3)).unwrap(), generate(&small(4)).unwrap());
    }

    #[test]
    fn clips_do_not_depend_on_clip_count() {
        let a = generate(&small(1)).unwrap();
        let b = generate(&SynthConfig {
            clip_count: 80,
            ..small(1)
        })
        .unwrap();
        assert_eq!(a.clips[..], b.clips[..50]);
    }

    #[test]
    fn emotions_lie_on_simplex() {
        let data = generate(&small(5)).unwrap();
        for e in data.clips.iter().flat_map(|c| c.face_emotions()) {
            let sum: f64 = e.scores().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            assert!(e.scores().iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn severities_agree_with_engagement_policy() {
        let data = generate(&small(9)).unwrap();
        for (id, labels) in &data.labels {
            let adapted = apply_policy(labels, PolicyId::Engagement).as_binary().unwrap();
            assert_eq!(adapted, data.oracle[id]);
        }
    }

    #[test]
    fn split_proportions() {
        let data = generate(&SynthConfig {
            clip_count: 100,
            frames_per_clip: 1,
            ..Default::default()
        })
        .unwrap();
        let count = |s| data.splits.values().filter(|v| **v == s).count();
        assert_eq!(count(SplitName::Train), 70);
        assert_eq!(count(SplitName::Validation), 10);
        assert_eq!(count(SplitName::Test), 20);
    }

    #[test]
    fn planted_offset_shows_in_class_means() {
        let cfg = SynthConfig {
            clip_count: 200,
            frames_per_clip: 5,
            temporal_noise: 0.0,
            informative_emotions: BTreeSet::from([Emotion::Happy]),
            ..Default::default()
        };
        let data = generate(&cfg).unwrap();
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        for clip in &data.clips {
            let e = clip.frames[0].emotions.unwrap();
            let y = data.oracle[&clip.clip_id] as usize;
            sums[y] += (e.get(Emotion::Happy) / e.get(Emotion::Neutral)).ln();
            counts[y] += 1;
        }
        let gap = sums[1] / counts[1] as f64 - sums[0] / counts[0] as f64;
        // log-ratio happy/neutral differs by the planted offset plus jitter noise
        assert!((gap - PLANTED_OFFSET).abs() < 0.25, "gap {gap}");
    }

    #[test]
    fn dropout_thins_face_frames() {
        let cfg = SynthConfig {
            clip_count: 20,
            face_dropout_rate: 0.9,
            ..Default::default()
        };
        let data = generate(&cfg).unwrap();
        let mean = data.clips.iter().map(Clip::face_count).sum::<usize>() as f64 / 20.0;
        // binomial(300, 0.1): mean 30, sd of the average ~1.2
        assert!((mean - 30.0).abs() < 5.0, "mean {mean}");
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig {
                clip_count: 0,
                ..Default::default()
            },
            SynthConfig {
                separability: 1.5,
                ..Default::default()
            },
            SynthConfig {
                face_dropout_rate: 1.0,
                ..Default::default()
            },
            SynthConfig {
                temporal_noise: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(generate(&cfg), Err(SynthError::InvalidConfig(_))));
        }
    }
}
