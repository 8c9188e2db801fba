//! Versioned JSON model documents.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "kind": "knn" | "logreg" | "mlp",
//!   "featurization": {...},
//!   "standardizer": {"means": [...], "stddevs": [...]},
//!   "parameters": {...},           // shape depends on kind
//!   "training_seed": 0,
//!   "metadata": {"created_at": "...", "dataset_digest": "..."}
//! }
//! ```
//!
//! Floats are written with shortest round-trip precision, so a loaded model
//! scores bit-identically to the one that was saved.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Classifier, KnnModel, LearnError, LogisticModel, MlpModel, ModelKind, ModelMetadata, Standardizer, TrainedModel};
use crate::pipeline::FeaturizationConfig;

pub const FORMAT_VERSION: u64 = 1;

const HIDDEN_ACTIVATION: &str = "relu";
const OUTPUT_ACTIVATION: &str = "sigmoid";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u64,
    kind: ModelKind,
    featurization: FeaturizationConfig,
    standardizer: Standardizer,
    parameters: Value,
    training_seed: u64,
    metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
struct MlpParameters {
    hidden_activation: String,
    output_activation: String,
    #[serde(flatten)]
    layers: MlpModel,
}

fn corrupt(e: impl std::fmt::Display) -> LearnError {
    LearnError::CorruptModel(e.to_string())
}

pub fn save_model(model: &TrainedModel) -> Vec<u8> {
    let parameters = match &model.classifier {
        Classifier::Knn(m) => serde_json::to_value(m),
        Classifier::Logreg(m) => serde_json::to_value(m),
        Classifier::Mlp(m) => serde_json::to_value(MlpParameters {
            hidden_activation: HIDDEN_ACTIVATION.into(),
            output_activation: OUTPUT_ACTIVATION.into(),
            layers: m.clone(),
        }),
    }
    .expect("model parameters serialize");
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        kind: model.kind(),
        featurization: model.featurization.clone(),
        standardizer: model.standardizer.clone(),
        parameters,
        training_seed: model.training_seed,
        metadata: model.metadata.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("model document serializes");
    bytes.push(b'\n');
    bytes
}

pub fn load_model(bytes: &[u8]) -> Result<TrainedModel, LearnError> {
    let value: Value = serde_json::from_slice(bytes).map_err(corrupt)?;
    let version = value
        .get("format_version")
        .ok_or_else(|| corrupt("missing format_version"))?
        .as_u64()
        .ok_or_else(|| corrupt("format_version is not an unsigned integer"))?;
    if version != FORMAT_VERSION {
        return Err(LearnError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let doc: ModelDocument = serde_json::from_value(value).map_err(corrupt)?;
    let classifier = match doc.kind {
        ModelKind::Knn => Classifier::Knn(serde_json::from_value::<KnnModel>(doc.parameters).map_err(corrupt)?),
        ModelKind::Logreg => {
            Classifier::Logreg(serde_json::from_value::<LogisticModel>(doc.parameters).map_err(corrupt)?)
        }
        ModelKind::Mlp => {
            let p: MlpParameters = serde_json::from_value(doc.parameters).map_err(corrupt)?;
            if p.hidden_activation != HIDDEN_ACTIVATION || p.output_activation != OUTPUT_ACTIVATION {
                return Err(corrupt(format!(
                    "unsupported activations {}/{}",
                    p.hidden_activation, p.output_activation
                )));
            }
            Classifier::Mlp(p.layers)
        }
    };
    let model = TrainedModel {
        standardizer: doc.standardizer,
        featurization: doc.featurization,
        classifier,
        training_seed: doc.training_seed,
        metadata: doc.metadata,
    };
    validate_shapes(&model)?;
    Ok(model)
}

fn validate_shapes(model: &TrainedModel) -> Result<(), LearnError> {
    model.featurization.validate().map_err(corrupt)?;
    let dim = model.featurization.flattened_len();
    if model.standardizer.means.len() != dim || model.standardizer.stddevs.len() != dim {
        return Err(corrupt(format!("standardizer does not have {dim} columns")));
    }
    let consistent = match &model.classifier {
        Classifier::Knn(m) => {
            m.k % 2 == 1
                && m.k <= m.rows.len()
                && m.rows.len() == m.labels.len()
                && m.rows.iter().all(|r| r.len() == dim)
                && m.labels.iter().all(|&y| y <= 1)
        }
        Classifier::Logreg(m) => m.weights.len() == dim,
        Classifier::Mlp(m) => {
            let hidden = m.hidden_bias.len();
            hidden > 0
                && m.hidden_weights.len() == hidden
                && m.output_weights.len() == hidden
                && m.hidden_weights.iter().all(|r| r.len() == dim)
        }
    };
    if consistent {
        Ok(())
    } else {
        Err(corrupt(format!("{} parameters inconsistent with input dimension {dim}", model.kind())))
    }
}
