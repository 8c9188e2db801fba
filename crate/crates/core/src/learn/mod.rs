//! Standardization and from-scratch binary classifiers over flattened clip
//! features, plus a versioned JSON model format.

mod knn;
mod logreg;
mod mlp;
mod persist;
mod standardize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::FeaturizationConfig;

pub use knn::{DistanceMetric, KnnModel};
pub use logreg::{logreg_gradient, logreg_loss, LogisticModel};
pub use mlp::{mlp_gradient, mlp_loss, MlpModel};
pub use persist::{load_model, save_model, FORMAT_VERSION};
pub use standardize::{Standardizer, CONSTANT_STDDEV};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("at least 2 training rows required, got {0}")]
    TooFewRows(usize),
    #[error("k={k} exceeds the {rows} training rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("k must be a positive odd integer, got {0}")]
    InvalidK(usize),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0}")]
    InvalidTrainingSet(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("corrupt model document: {0}")]
    CorruptModel(String),
}

/// Row-aligned features, binary labels and clip identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    clip_ids: Vec<String>,
}

impl TrainingSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>, clip_ids: Vec<String>) -> Result<Self, LearnError> {
        if features.len() != labels.len() || features.len() != clip_ids.len() {
            return Err(LearnError::InvalidTrainingSet(format!(
                "row counts disagree: {} feature rows, {} labels, {} clip ids",
                features.len(),
                labels.len(),
                clip_ids.len()
            )));
        }
        if let Some(first) = features.first() {
            let width = first.len();
            if let Some(bad) = features.iter().find(|r| r.len() != width) {
                return Err(LearnError::DimensionMismatch {
                    expected: width,
                    found: bad.len(),
                });
            }
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(LearnError::InvalidTrainingSet(format!("label {bad} is not binary")));
        }
        Ok(Self {
            features,
            labels,
            clip_ids,
        })
    }

    /// Convenience constructor that numbers clips `row0`, `row1`, ...
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self, LearnError> {
        let ids = (0..features.len()).map(|i| format!("row{i}")).collect();
        Self::new(features, labels, ids)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn clip_ids(&self) -> &[String] {
        &self.clip_ids
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    Logreg,
    Mlp,
}

impl ModelKind {
    pub const fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Logreg => "logreg",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "knn" => Ok(ModelKind::Knn),
            "logreg" => Ok(ModelKind::Logreg),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(format!("unknown model '{s}' (expected knn, logreg or mlp)")),
        }
    }
}

/// Classifier choice plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Knn {
        k: usize,
        metric: DistanceMetric,
    },
    Logreg {
        epochs: usize,
        learning_rate: f64,
        l2: f64,
    },
    Mlp {
        hidden: usize,
        epochs: usize,
        learning_rate: f64,
    },
}

impl ClassifierSpec {
    pub const fn default_knn() -> Self {
        ClassifierSpec::Knn {
            k: 5,
            metric: DistanceMetric::Euclidean,
        }
    }

    pub const fn default_logreg() -> Self {
        ClassifierSpec::Logreg {
            epochs: 500,
            learning_rate: 0.1,
            l2: 1e-3,
        }
    }

    pub const fn default_mlp() -> Self {
        ClassifierSpec::Mlp {
            hidden: 64,
            epochs: 200,
            learning_rate: 0.05,
        }
    }

    pub const fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Knn => Self::default_knn(),
            ModelKind::Logreg => Self::default_logreg(),
            ModelKind::Mlp => Self::default_mlp(),
        }
    }

    pub const fn kind(&self) -> ModelKind {
        match self {
            ClassifierSpec::Knn { .. } => ModelKind::Knn,
            ClassifierSpec::Logreg { .. } => ModelKind::Logreg,
            ClassifierSpec::Mlp { .. } => ModelKind::Mlp,
        }
    }
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self::default_knn()
    }
}

/// A fitted classifier operating on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Knn(KnnModel),
    Logreg(LogisticModel),
    Mlp(MlpModel),
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Knn(_) => ModelKind::Knn,
            Classifier::Logreg(_) => ModelKind::Logreg,
            Classifier::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Classifier::Knn(m) => m.input_dim(),
            Classifier::Logreg(m) => m.weights.len(),
            Classifier::Mlp(m) => m.input_dim(),
        }
    }

    /// Probability-like score of class 1 for a standardized row.
    pub fn score(&self, row: &[f64]) -> f64 {
        match self {
            Classifier::Knn(m) => m.score(row),
            Classifier::Logreg(m) => m.score(row),
            Classifier::Mlp(m) => m.score(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub created_at: String,
    pub dataset_digest: String,
}

/// Everything needed to score a new clip: standardizer, classifier and the
/// featurization that produced its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub standardizer: Standardizer,
    pub featurization: FeaturizationConfig,
    pub classifier: Classifier,
    pub training_seed: u64,
    pub metadata: ModelMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: u8,
    pub score: f64,
}

impl TrainedModel {
    /// Fit a standardizer on `train` and the classifier on the standardized rows.
    pub fn fit(
        train: &TrainingSet,
        spec: &ClassifierSpec,
        featurization: FeaturizationConfig,
        seed: u64,
    ) -> Result<Self, LearnError> {
        let expected = featurization.flattened_len();
        if train.dim() != expected && !train.is_empty() {
            return Err(LearnError::DimensionMismatch {
                expected,
                found: train.dim(),
            });
        }
        let standardizer = Standardizer::fit(train)?;
        let rows = standardizer.transform_rows(train.features());
        let labels = train.labels();
        let classifier = match *spec {
            ClassifierSpec::Knn { k, metric } => Classifier::Knn(KnnModel::fit(rows, labels.to_vec(), k, metric)?),
            ClassifierSpec::Logreg {
                epochs,
                learning_rate,
                l2,
            } => Classifier::Logreg(LogisticModel::fit(&rows, labels, epochs, learning_rate, l2)?.0),
            ClassifierSpec::Mlp {
                hidden,
                epochs,
                learning_rate,
            } => Classifier::Mlp(MlpModel::fit(&rows, labels, hidden, epochs, learning_rate, seed)?.0),
        };
        Ok(Self {
            standardizer,
            featurization,
            classifier,
            training_seed: seed,
            metadata: ModelMetadata::default(),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.classifier.kind()
    }

    pub fn input_dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Standardize `features` and score them; label is `score >= 0.5`.
    pub fn predict(&self, features: &[f64]) -> Result<Prediction, LearnError> {
        if features.len() != self.input_dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.input_dim(),
                found: features.len(),
            });
        }
        let row = self.standardizer.transform(features);
        let score = self.classifier.score(&row);
        Ok(Prediction {
            label: u8::from(score >= 0.5),
            score,
        })
    }
}

pub fn train_knn(
    train: &TrainingSet,
    k: usize,
    metric: DistanceMetric,
    featurization: FeaturizationConfig,
) -> Result<TrainedModel, LearnError> {
    TrainedModel::fit(train, &ClassifierSpec::Knn { k, metric }, featurization, 0)
}

pub fn train_logreg(
    train: &TrainingSet,
    epochs: usize,
    learning_rate: f64,
    l2: f64,
    seed: u64,
    featurization: FeaturizationConfig,
) -> Result<TrainedModel, LearnError> {
    let spec = ClassifierSpec::Logreg {
        epochs,
        learning_rate,
        l2,
    };
    TrainedModel::fit(train, &spec, featurization, seed)
}

pub fn train_mlp(
    train: &TrainingSet,
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    featurization: FeaturizationConfig,
) -> Result<TrainedModel, LearnError> {
    let spec = ClassifierSpec::Mlp {
        hidden,
        epochs,
        learning_rate,
    };
    TrainedModel::fit(train, &spec, featurization, seed)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of logit `z` against label `y`, computed stably.
pub(crate) fn logit_cross_entropy(z: f64, y: u8) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - f64::from(y) * z
}

pub(crate) fn check_trainable(rows: &[Vec<f64>], labels: &[u8]) -> Result<(), LearnError> {
    if rows.len() != labels.len() {
        return Err(LearnError::InvalidTrainingSet(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(LearnError::SingleClass);
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::collections::BTreeSet;

    use crate::ingest::Emotion;
    use crate::pipeline::FeaturizationConfig;

    /// A featurization whose flattened length is `dim`.
    pub fn cfg_for_dim(dim: usize) -> FeaturizationConfig {
        FeaturizationConfig {
            z: 1,
            m: dim,
            dropped_emotions: Emotion::ALL.into_iter().skip(1).collect::<BTreeSet<_>>(),
            ..Default::default()
        }
    }
}
