//! Learner-engagement detection from per-frame facial emotion streams.
//!
//! The crate turns variable-length sequences of seven-way emotion scores into
//! fixed-length feature vectors (stride filtering, true-positive-rate
//! weighting, emotion selection), adapts four-state affective annotations to a
//! binary Engaged/Disengaged target, and trains and evaluates small classical
//! classifiers on the result.
//!
//! Module map:
//!
//! * [`ingest`]: interchange formats, validation and dataset assembly.
//! * [`pipeline`]: clip featurization.
//! * [`labels`]: label adaptation policies and undersampling.
//! * [`learn`]: standardization, KNN, logistic regression, MLP, persistence.
//! * [`eval`]: experiment runner, metrics, z-sweeps and emotion ablation.
//! * [`synth`]: seeded synthetic datasets with a planted-label oracle.

pub mod eval;
pub mod ingest;
pub mod labels;
pub mod learn;
pub mod pipeline;
pub mod synth;

pub use ingest::{AffectiveLabels, Clip, Dataset, Emotion, EmotionVector, FrameRecord, SplitName};
pub use labels::{AdaptedLabel, PolicyId};
pub use pipeline::{ClipFeatureMatrix, FeaturizationConfig, ShortClipPolicy, WeightProfile};

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
