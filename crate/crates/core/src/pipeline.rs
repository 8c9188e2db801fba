//! Clip featurization: frame stride selection, true-positive-rate weighting,
//! emotion removal and flattening to a fixed-length vector.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Clip, Emotion, EmotionVector, EMOTION_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum PipelineError {
    #[error("clip has {available} face-bearing frames, {required} required")]
    ClipTooShort { available: usize, required: usize },
    #[error("all emotions dropped; at least one feature must remain")]
    AllEmotionsDropped,
    #[error("invalid featurization config: {0}")]
    InvalidConfig(String),
}

/// Per-emotion multipliers in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; EMOTION_COUNT]", into = "[f64; EMOTION_COUNT]")]
pub struct WeightProfile([f64; EMOTION_COUNT]);

impl WeightProfile {
    /// True-positive rates of the FER-2013 emotion network per class.
    pub const FER2013_TP_RATES: [f64; EMOTION_COUNT] = [0.9, 0.8, 0.77, 0.62, 0.5, 0.37, 0.28];

    pub fn new(weights: [f64; EMOTION_COUNT]) -> Result<Self, PipelineError> {
        if weights.iter().all(|w| *w > 0.0 && *w <= 1.0) {
            Ok(Self(weights))
        } else {
            Err(PipelineError::InvalidConfig(format!("weights must lie in (0, 1], got {weights:?}")))
        }
    }

    pub fn tp_rates() -> Self {
        Self(Self::FER2013_TP_RATES)
    }

    pub fn uniform() -> Self {
        Self([1.0; EMOTION_COUNT])
    }

    pub fn get(&self, emotion: Emotion) -> f64 {
        self.0[emotion.index()]
    }

    pub fn as_array(&self) -> &[f64; EMOTION_COUNT] {
        &self.0
    }
}

impl Default for WeightProfile {
    fn default() -> Self {
        Self::tp_rates()
    }
}

impl TryFrom<[f64; EMOTION_COUNT]> for WeightProfile {
    type Error = PipelineError;

    fn try_from(value: [f64; EMOTION_COUNT]) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<WeightProfile> for [f64; EMOTION_COUNT] {
    fn from(value: WeightProfile) -> Self {
        value.0
    }
}

/// What to do with clips that cannot supply `(m - 1) * z + 1` face frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortClipPolicy {
    #[default]
    Reject,
    UniformResample,
}

impl fmt::Display for ShortClipPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShortClipPolicy::Reject => "reject",
            ShortClipPolicy::UniformResample => "uniform_resample",
        })
    }
}

impl std::str::FromStr for ShortClipPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reject" => Ok(ShortClipPolicy::Reject),
            "uniform_resample" => Ok(ShortClipPolicy::UniformResample),
            _ => Err(format!("unknown short-clip policy '{s}' (expected reject or uniform_resample)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizationConfig {
    /// Frame stride.
    pub z: usize,
    /// Frames kept per clip.
    pub m: usize,
    pub dropped_emotions: BTreeSet<Emotion>,
    pub weights: WeightProfile,
    pub short_clip_policy: ShortClipPolicy,
    pub weighting_enabled: bool,
}

impl Default for FeaturizationConfig {
    fn default() -> Self {
        Self {
            z: 30,
            m: 10,
            dropped_emotions: BTreeSet::from([Emotion::Angry]),
            weights: WeightProfile::tp_rates(),
            short_clip_policy: ShortClipPolicy::Reject,
            weighting_enabled: true,
        }
    }
}

impl FeaturizationConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.z == 0 || self.m == 0 {
            return Err(PipelineError::InvalidConfig(format!(
                "z and m must be positive (z={}, m={})",
                self.z, self.m
            )));
        }
        if self.dropped_emotions.len() >= EMOTION_COUNT {
            return Err(PipelineError::AllEmotionsDropped);
        }
        Ok(())
    }

    /// Features kept per frame.
    pub fn features_per_frame(&self) -> usize {
        EMOTION_COUNT - self.dropped_emotions.len()
    }

    /// Length of the flattened clip vector, `m * s`.
    pub fn flattened_len(&self) -> usize {
        self.m * self.features_per_frame()
    }

    /// Emotions that survive dropping, in canonical order.
    pub fn kept_emotions(&self) -> Vec<Emotion> {
        Emotion::ALL
            .into_iter()
            .filter(|e| !self.dropped_emotions.contains(e))
            .collect()
    }

    /// Stable short hash of the config, used to tag featurized outputs.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        crate::sha256_hex(&canonical)[..16].to_string()
    }
}

/// Positions of the frames kept from a sequence of `n` face frames.
pub fn stride_indices(n: usize, z: usize, m: usize, policy: ShortClipPolicy) -> Result<Vec<usize>, PipelineError> {
    if z == 0 || m == 0 {
        return Err(PipelineError::InvalidConfig(format!("z and m must be positive (z={z}, m={m})")));
    }
    if n < m {
        return Err(PipelineError::ClipTooShort {
            available: n,
            required: m,
        });
    }
    let required = (m - 1) * z + 1;
    if n >= required {
        return Ok((0..m).map(|i| i * z).collect());
    }
    match policy {
        ShortClipPolicy::Reject => Err(PipelineError::ClipTooShort { available: n, required }),
        ShortClipPolicy::UniformResample if m == 1 => Ok(vec![0]),
        // round(i * (n - 1) / (m - 1)) with halves rounded up, in integers.
        ShortClipPolicy::UniformResample => Ok((0..m)
            .map(|i| (2 * i * (n - 1) + (m - 1)) / (2 * (m - 1)))
            .collect()),
    }
}

/// Select exactly `m` frames: every `z`-th starting at position 0, or evenly
/// spaced positions for short clips under [`ShortClipPolicy::UniformResample`].
pub fn stride_filter<T>(frames: &[T], z: usize, m: usize, policy: ShortClipPolicy) -> Result<Vec<&T>, PipelineError> {
    Ok(stride_indices(frames.len(), z, m, policy)?
        .into_iter()
        .map(|i| &frames[i])
        .collect())
}

pub fn encode_weights(row: &EmotionVector, weights: &WeightProfile) -> [f64; EMOTION_COUNT] {
    let mut out = *row.scores();
    for (x, w) in out.iter_mut().zip(weights.as_array()) {
        *x *= w;
    }
    out
}

pub fn drop_emotions(row: &[f64; EMOTION_COUNT], dropped: &BTreeSet<Emotion>) -> Result<Vec<f64>, PipelineError> {
    if dropped.len() >= EMOTION_COUNT {
        return Err(PipelineError::AllEmotionsDropped);
    }
    Ok(Emotion::ALL
        .iter()
        .filter(|e| !dropped.contains(e))
        .map(|e| row[e.index()])
        .collect())
}

/// The `m x s` feature block of one clip, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatureMatrix {
    pub clip_id: String,
    width: usize,
    flattened: Vec<f64>,
}

impl ClipFeatureMatrix {
    pub fn from_flattened(clip_id: String, width: usize, flattened: Vec<f64>) -> Self {
        assert!(width > 0 && flattened.len().is_multiple_of(width), "flattened length must be a multiple of the row width");
        Self {
            clip_id,
            width,
            flattened,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.flattened.chunks(self.width)
    }

    pub fn row_count(&self) -> usize {
        self.flattened.len() / self.width
    }

    pub fn row_width(&self) -> usize {
        self.width
    }

    pub fn flattened(&self) -> &[f64] {
        &self.flattened
    }

    pub fn into_flattened(self) -> Vec<f64> {
        self.flattened
    }
}

/// Stride-filter the clip's face frames, weight each kept row (if enabled),
/// drop the configured emotions and flatten.
pub fn featurize_clip(clip: &Clip, cfg: &FeaturizationConfig) -> Result<ClipFeatureMatrix, PipelineError> {
    cfg.validate()?;
    let faces: Vec<&EmotionVector> = clip.face_emotions().collect();
    let selected = stride_filter(&faces, cfg.z, cfg.m, cfg.short_clip_policy)?;
    let mut flattened = Vec::with_capacity(cfg.flattened_len());
    for row in selected {
        let encoded = if cfg.weighting_enabled {
            encode_weights(row, &cfg.weights)
        } else {
            *row.scores()
        };
        flattened.extend(drop_emotions(&encoded, &cfg.dropped_emotions)?);
    }
    Ok(ClipFeatureMatrix::from_flattened(
        clip.clip_id.clone(),
        cfg.features_per_frame(),
        flattened,
    ))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeaturizedDataset {
    pub features: BTreeMap<String, ClipFeatureMatrix>,
    pub rejects: BTreeMap<String, PipelineError>,
}

/// Featurize every clip; failures are collected per clip instead of aborting.
pub fn featurize_dataset<'a, I>(clips: I, cfg: &FeaturizationConfig) -> FeaturizedDataset
where
    I: IntoIterator<Item = &'a Clip>,
{
    let clips: Vec<&Clip> = clips.into_iter().collect();
    let results: Vec<(String, Result<ClipFeatureMatrix, PipelineError>)> = clips
        .par_iter()
        .map(|clip| (clip.clip_id.clone(), featurize_clip(clip, cfg)))
        .collect();
    let mut out = FeaturizedDataset::default();
    for (clip_id, result) in results {
        match result {
            Ok(matrix) => {
                out.features.insert(clip_id, matrix);
            }
            Err(e) => {
                out.rejects.insert(clip_id, e);
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct FeatureLine {
    clip_id: String,
    config_digest: String,
    flattened: Vec<f64>,
}

/// Write featurized clips as JSON Lines `{clip_id, config_digest, flattened}`.
pub fn write_featurized<W: Write>(
    features: &BTreeMap<String, ClipFeatureMatrix>,
    cfg: &FeaturizationConfig,
    mut out: W,
) -> io::Result<()> {
    let digest = cfg.digest();
    for matrix in features.values() {
        let line = FeatureLine {
            clip_id: matrix.clip_id.clone(),
            config_digest: digest.clone(),
            flattened: matrix.flattened.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read featurized clips, rejecting lines produced under a different config.
pub fn read_featurized<R: BufRead>(
    source: R,
    cfg: &FeaturizationConfig,
) -> io::Result<BTreeMap<String, ClipFeatureMatrix>> {
    let digest = cfg.digest();
    let mut out = BTreeMap::new();
    for (idx, text) in source.lines().enumerate() {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {msg}", idx + 1));
        let line: FeatureLine = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if line.config_digest != digest {
            return Err(bad(format!("config digest {} does not match {digest}", line.config_digest)));
        }
        if line.flattened.len() != cfg.flattened_len() {
            return Err(bad(format!("expected {} features, found {}", cfg.flattened_len(), line.flattened.len())));
        }
        let matrix = ClipFeatureMatrix::from_flattened(line.clip_id.clone(), cfg.features_per_frame(), line.flattened);
        out.insert(line.clip_id, matrix);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FrameRecord;

    fn ev(scores: [f64; 7]) -> EmotionVector {
        EmotionVector::new(scores, false).unwrap()
    }

    fn clip_from(rows: &[[f64; 7]]) -> Clip {
        Clip {
            clip_id: "c".into(),
            frames: rows
                .iter()
                .enumerate()
                .map(|(i, r)| FrameRecord {
                    clip_id: "c".into(),
                    frame_index: i as u64,
                    timestamp_ms: i as u64 * 33,
                    emotions: Some(ev(*r)),
                })
                .collect(),
        }
    }

    #[test]
    fn strict_stride_positions() {
        let idx = stride_indices(300, 30, 10, ShortClipPolicy::Reject).unwrap();
        assert_eq!(idx, [0, 30, 60, 90, 120, 150, 180, 210, 240, 270]);
    }

    #[test]
    fn identity_filter() {
        let frames: Vec<u32> = (0..17).collect();
        let out: Vec<u32> = stride_filter(&frames, 1, 17, ShortClipPolicy::Reject)
            .unwrap()
            .into_iter()
            .copied()
            .collect();
        assert_eq!(out, frames);
    }

    #[test]
    fn fewer_frames_than_m_is_too_short_in_both_modes() {
        for policy in [ShortClipPolicy::Reject, ShortClipPolicy::UniformResample] {
            assert_eq!(
                stride_indices(9, 30, 10, policy),
                Err(PipelineError::ClipTooShort {
                    available: 9,
                    required: 10
                })
            );
        }
    }

    #[test]
    fn reject_mode_requires_full_span() {
        assert_eq!(
            stride_indices(270, 30, 10, ShortClipPolicy::Reject),
            Err(PipelineError::ClipTooShort {
                available: 270,
                required: 271
            })
        );
        assert!(stride_indices(271, 30, 10, ShortClipPolicy::Reject).is_ok());
    }

    #[test]
    fn uniform_resample_spreads_evenly() {
        // round(i * 99 / 9) = round(11 i)
        let idx = stride_indices(100, 30, 10, ShortClipPolicy::UniformResample).unwrap();
        assert_eq!(idx, [0, 11, 22, 33, 44, 55, 66, 77, 88, 99]);
        // round(i * 10 / 3): 0, 3.33, 6.67, 10
        let idx = stride_indices(11, 30, 4, ShortClipPolicy::UniformResample).unwrap();
        assert_eq!(idx, [0, 3, 7, 10]);
        // halves round up: round(i * 3 / 2) -> 0, 1.5, 3
        let idx = stride_indices(4, 30, 3, ShortClipPolicy::UniformResample).unwrap();
        assert_eq!(idx, [0, 2, 3]);
        assert_eq!(stride_indices(5, 30, 1, ShortClipPolicy::UniformResample).unwrap(), [0]);
    }

    #[test]
    fn uniform_resample_uses_stride_when_long_enough() {
        let idx = stride_indices(300, 30, 10, ShortClipPolicy::UniformResample).unwrap();
        assert_eq!(idx, stride_indices(300, 30, 10, ShortClipPolicy::Reject).unwrap());
    }

    #[test]
    fn encode_examples() {
        let w = WeightProfile::tp_rates();
        assert_eq!(encode_weights(&ev([1.0; 7]), &w), [0.9, 0.8, 0.77, 0.62, 0.5, 0.37, 0.28]);
        assert_eq!(encode_weights(&ev([0.0; 7]), &w), [0.0; 7]);
        let out = encode_weights(&ev([0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.25]), &w);
        let expected = [0.45, 0.2, 0.0, 0.0, 0.0, 0.0, 0.07];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn drop_examples() {
        let row = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        assert_eq!(
            drop_emotions(&row, &BTreeSet::from([Emotion::Angry])).unwrap(),
            [1.0, 2.0, 3.0, 4.0, 6.0, 7.0]
        );
        assert_eq!(drop_emotions(&row, &BTreeSet::new()).unwrap(), row);
        let all: BTreeSet<Emotion> = Emotion::ALL.into_iter().collect();
        assert_eq!(drop_emotions(&row, &all), Err(PipelineError::AllEmotionsDropped));
    }

    #[test]
    fn degenerate_config_returns_first_frame() {
        let first = [0.1, 0.2, 0.3, 0.1, 0.1, 0.1, 0.1];
        let clip = clip_from(&[first, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]);
        let cfg = FeaturizationConfig {
            z: 1,
            m: 1,
            dropped_emotions: BTreeSet::new(),
            weighting_enabled: false,
            ..Default::default()
        };
        assert_eq!(featurize_clip(&clip, &cfg).unwrap().flattened(), first);
    }

    #[test]
    fn three_frame_clip_matches_hand_products() {
        let clip = clip_from(&[
            [0.1, 0.2, 0.3, 0.1, 0.1, 0.1, 0.1],
            [0.7, 0.1, 0.0, 0.0, 0.1, 0.0, 0.1],
            [0.0, 0.0, 0.0, 0.5, 0.0, 0.25, 0.25],
        ]);
        let cfg = FeaturizationConfig {
            z: 1,
            m: 3,
            ..Default::default()
        };
        let expected = [
            [0.09, 0.16, 0.231, 0.062, 0.037, 0.028],
            [0.63, 0.08, 0.0, 0.0, 0.0, 0.028],
            [0.0, 0.0, 0.0, 0.31, 0.0925, 0.07],
        ];
        let matrix = featurize_clip(&clip, &cfg).unwrap();
        assert_eq!(matrix.row_count(), 3);
        for (row, want) in matrix.rows().zip(expected) {
            for (a, b) in row.iter().zip(want) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn default_config_gives_sixty_features() {
        let clip = clip_from(&vec![[1.0 / 7.0; 7]; 300]);
        let matrix = featurize_clip(&clip, &FeaturizationConfig::default()).unwrap();
        assert_eq!(matrix.flattened().len(), 60);
        assert_eq!(matrix.row_width(), 6);
    }

    #[test]
    fn faceless_frames_are_skipped_before_striding() {
        let mut clip = clip_from(&[[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]);
        clip.frames.insert(
            0,
            FrameRecord {
                clip_id: "c".into(),
                frame_index: 0,
                timestamp_ms: 0,
                emotions: None,
            },
        );
        let cfg = FeaturizationConfig {
            z: 1,
            m: 1,
            dropped_emotions: BTreeSet::new(),
            weighting_enabled: false,
            ..Default::default()
        };
        assert_eq!(featurize_clip(&clip, &cfg).unwrap().flattened()[0], 1.0);
    }

    #[test]
    fn dataset_partitions_rejects() {
        let mut long_a = clip_from(&vec![[1.0 / 7.0; 7]; 300]);
        long_a.clip_id = "a".into();
        let mut long_b = long_a.clone();
        long_b.clip_id = "b".into();
        let mut short = clip_from(&vec![[1.0 / 7.0; 7]; 20]);
        short.clip_id = "s".into();
        let clips = [long_a, short, long_b];
        let cfg = FeaturizationConfig::default();
        let out = featurize_dataset(&clips, &cfg);
        assert_eq!(out.features.keys().collect::<Vec<_>>(), ["a", "b"]);
        assert!(matches!(out.rejects["s"], PipelineError::ClipTooShort { available: 20, .. }));
        assert_eq!(out, featurize_dataset(&clips, &cfg));
        assert_eq!(featurize_dataset(&[], &cfg), FeaturizedDataset::default());
    }

    #[test]
    fn config_validation() {
        let mut cfg = FeaturizationConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.z = 0;
        assert!(matches!(cfg.validate(), Err(PipelineError::InvalidConfig(_))));
        cfg.z = 1;
        cfg.dropped_emotions = Emotion::ALL.into_iter().collect();
        assert_eq!(cfg.validate(), Err(PipelineError::AllEmotionsDropped));
        assert!(WeightProfile::new([0.0; 7]).is_err());
        assert!(serde_json::from_str::<WeightProfile>("[1,1,1,1,1,1,2]").is_err());
    }

    #[test]
    fn digest_tracks_config() {
        let a = FeaturizationConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.z = 10;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn featurized_jsonl_round_trip() {
        let clip = clip_from(&vec![[0.1, 0.2, 0.3, 0.1, 0.1, 0.1, 0.1]; 300]);
        let cfg = FeaturizationConfig::default();
        let out = featurize_dataset([&clip], &cfg);
        let mut buf = Vec::new();
        write_featurized(&out.features, &cfg, &mut buf).unwrap();
        assert_eq!(read_featurized(buf.as_slice(), &cfg).unwrap(), out.features);
        let other = FeaturizationConfig {
            z: 10,
            ..cfg
        };
        assert!(read_featurized(buf.as_slice(), &other).is_err());
    }
}
