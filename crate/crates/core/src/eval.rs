//! Experiment orchestration and classification metrics.
//!
//! An experiment trains on the union of the train and validation splits and
//! scores the test split. Labels are adapted with a policy, clips that cannot
//! be featurized are set aside, the training pool is balanced by
//! undersampling, a standardizer is fitted on the balanced training rows only,
//! and the classifier is scored on the test clips twice: once on a
//! class-balanced subsample (drawn with its own seed) and once on every test
//! clip.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{format_emotion_set, Dataset, Emotion, SplitName};
use crate::labels::{adapt_dataset, balance_undersample, AdaptedLabel, LabelError, PolicyId};
use crate::learn::{ClassifierSpec, LearnError, TrainedModel, TrainingSet};
use crate::pipeline::{featurize_dataset, ClipFeatureMatrix, FeaturizationConfig, PipelineError};

/// Mixed into the balance seed to derive the evaluation-set undersampling seed.
const EVAL_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("prediction and truth lengths differ ({predictions} vs {truth})")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("metrics need at least one prediction")]
    EmptyInput,
    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),
    #[error("insufficient evaluation clips: {0}")]
    InsufficientEvaluationClips(String),
    #[error("training pool: {0}")]
    Training(#[from] LabelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub policy: PolicyId,
    pub featurization: FeaturizationConfig,
    pub classifier: ClassifierSpec,
    pub balance_seed: u64,
    pub training_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policy: PolicyId::EngagementConfusion,
            featurization: FeaturizationConfig::default(),
            classifier: ClassifierSpec::default(),
            balance_seed: 0,
            training_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn eval_balance_seed(&self) -> u64 {
        self.balance_seed ^ EVAL_SEED_SALT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Indexed by class: 0 Disengaged, 1 Engaged.
    pub classes: [ClassMetrics; 2],
    /// `confusion[truth][predicted]`.
    pub confusion: [[usize; 2]; 2],
}

impl MetricsReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Per-class rows followed by accuracy.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<12} {:>9} {:>9} {:>9} {:>9}\n",
            "Label", "precision", "recall", "f1-score", "support"
        );
        for (name, c) in ["Disengaged", "Engaged"].iter().zip(&self.classes) {
            let _ = writeln!(
                out,
                "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                name, c.precision, c.recall, c.f1, c.support
            );
        }
        let _ = writeln!(out, "{:<12} {:>29.4} {:>9}", "accuracy", self.accuracy, self.total());
        let _ = writeln!(
            out,
            "confusion (rows truth, cols predicted): [[{}, {}], [{}, {}]]",
            self.confusion[0][0], self.confusion[0][1], self.confusion[1][0], self.confusion[1][1]
        );
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(predictions: &[u8], truth: &[u8]) -> Result<MetricsReport, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p > 1 || t > 1 {
            return Err(EvalError::NonBinaryLabel(p.max(t)));
        }
        confusion[t as usize][p as usize] += 1;
    }
    let classes = [0usize, 1].map(|c| {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let support = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    });
    Ok(MetricsReport {
        accuracy: ratio(confusion[0][0] + confusion[1][1], truth.len()),
        classes,
        confusion,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Metrics on the class-balanced test subsample.
    pub balanced: MetricsReport,
    /// Metrics on every usable test clip.
    pub unbalanced: MetricsReport,
    /// Training clips in the order they were fed to the classifier.
    pub train_clip_ids: Vec<String>,
    /// Clips of the balanced evaluation subsample.
    pub eval_clip_ids: Vec<String>,
    pub unbalanced_eval_clip_ids: Vec<String>,
    /// Clips dropped because they could not be featurized.
    pub rejects: BTreeMap<String, PipelineError>,
    pub model: TrainedModel,
}

impl ExperimentReport {
    pub fn n_train(&self) -> usize {
        self.train_clip_ids.len()
    }

    pub fn n_eval(&self) -> usize {
        self.eval_clip_ids.len()
    }

    pub fn render(&self) -> String {
        format!(
            "policy={} classifier={} z={} m={} dropped={} n_train={} rejects={}\n\
             -- balanced test set (n={}) --\n{}-- full test set (n={}) --\n{}",
            self.config.policy,
            self.config.classifier.kind(),
            self.config.featurization.z,
            self.config.featurization.m,
            format_emotion_set(&self.config.featurization.dropped_emotions),
            self.n_train(),
            self.rejects.len(),
            self.n_eval(),
            self.balanced.render(),
            self.unbalanced_eval_clip_ids.len(),
            self.unbalanced.render()
        )
    }
}

/// Adapted, determined labels split into the training pool (train and
/// validation) and the evaluation pool (test).
fn partition_pools(
    policy: PolicyId,
    dataset: &Dataset,
) -> (BTreeMap<String, AdaptedLabel>, BTreeMap<String, AdaptedLabel>) {
    let (adapted, _) = adapt_dataset(dataset.labels(), policy);
    let mut train_pool = BTreeMap::new();
    let mut eval_pool = BTreeMap::new();
    for (clip_id, label) in adapted {
        if label == AdaptedLabel::NotDetermined {
            continue;
        }
        match dataset.split_of(&clip_id) {
            Some(SplitName::Train | SplitName::Validation) => train_pool.insert(clip_id, label),
            Some(SplitName::Test) => eval_pool.insert(clip_id, label),
            None => None,
        };
    }
    (train_pool, eval_pool)
}

fn binary(pool: &BTreeMap<String, AdaptedLabel>, id: &str) -> u8 {
    pool[id].as_binary().expect("pools hold determined labels only")
}

/// Balance the featurized training pool and fit the configured classifier.
fn fit_training_pool(
    cfg: &ExperimentConfig,
    pool: &BTreeMap<String, AdaptedLabel>,
    features: &BTreeMap<String, ClipFeatureMatrix>,
) -> Result<(TrainedModel, Vec<String>), EvalError> {
    let train_ids = balance_undersample(pool, cfg.balance_seed)?;
    let train = TrainingSet::new(
        train_ids.iter().map(|id| features[id].flattened().to_vec()).collect(),
        train_ids.iter().map(|id| binary(pool, id)).collect(),
        train_ids.clone(),
    )?;
    let model = TrainedModel::fit(&train, &cfg.classifier, cfg.featurization.clone(), cfg.training_seed)?;
    Ok((model, train_ids))
}

/// A classifier fitted on the balanced training pool, without evaluation.
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: TrainedModel,
    pub train_clip_ids: Vec<String>,
    pub rejects: BTreeMap<String, PipelineError>,
}

/// Train on the train and validation splits only; test clips are not read.
pub fn train_model(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<TrainingOutcome, EvalError> {
    cfg.featurization.validate()?;
    let (mut pool, _) = partition_pools(cfg.policy, dataset);
    let featurized = featurize_dataset(pool.keys().map(|id| &dataset.clips()[id]), &cfg.featurization);
    pool.retain(|id, _| featurized.features.contains_key(id));
    let (model, train_clip_ids) = fit_training_pool(cfg, &pool, &featurized.features)?;
    Ok(TrainingOutcome {
        model,
        train_clip_ids,
        rejects: featurized.rejects,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentReport, EvalError> {
    cfg.featurization.validate()?;
    let (mut train_pool, mut eval_pool) = partition_pools(cfg.policy, dataset);

    let candidates = train_pool
        .keys()
        .chain(eval_pool.keys())
        .map(|id| &dataset.clips()[id]);
    let featurized = featurize_dataset(candidates, &cfg.featurization);
    train_pool.retain(|id, _| featurized.features.contains_key(id));
    eval_pool.retain(|id, _| featurized.features.contains_key(id));

    let (model, train_ids) = fit_training_pool(cfg, &train_pool, &featurized.features)?;
    assert!(
        train_ids.iter().all(|id| !eval_pool.contains_key(id)),
        "evaluation clip leaked into training"
    );
    let eval_ids = balance_undersample(&eval_pool, cfg.eval_balance_seed())
        .map_err(|e| EvalError::InsufficientEvaluationClips(e.to_string()))?;
    let all_eval_ids: Vec<String> = eval_pool.keys().cloned().collect();

    let score = |ids: &[String]| -> Result<MetricsReport, EvalError> {
        let mut predictions = Vec::with_capacity(ids.len());
        for id in ids {
            predictions.push(model.predict(featurized.features[id].flattened())?.label);
        }
        let truth: Vec<u8> = ids.iter().map(|id| binary(&eval_pool, id)).collect();
        compute_metrics(&predictions, &truth)
    };
    let balanced = score(&eval_ids)?;
    let unbalanced = score(&all_eval_ids)?;

    Ok(ExperimentReport {
        config: cfg.clone(),
        balanced,
        unbalanced,
        train_clip_ids: train_ids,
        eval_clip_ids: eval_ids,
        unbalanced_eval_clip_ids: all_eval_ids,
        rejects: featurized.rejects,
        model,
    })
}

/// One line of the machine-readable report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy: String,
    pub classifier: String,
    pub z: usize,
    pub m: usize,
    pub dropped: String,
    pub seed_balance: u64,
    pub seed_train: u64,
    pub accuracy: f64,
    pub precision_0: f64,
    pub recall_0: f64,
    pub f1_0: f64,
    pub precision_1: f64,
    pub recall_1: f64,
    pub f1_1: f64,
    pub n_train: usize,
    pub n_eval: usize,
}

impl ReportRow {
    pub fn new(cfg: &ExperimentConfig, metrics: &MetricsReport, n_train: usize) -> Self {
        let [c0, c1] = metrics.classes;
        Self {
            policy: cfg.policy.name().to_string(),
            classifier: cfg.classifier.kind().name().to_string(),
            z: cfg.featurization.z,
            m: cfg.featurization.m,
            dropped: format_emotion_set(&cfg.featurization.dropped_emotions),
            seed_balance: cfg.balance_seed,
            seed_train: cfg.training_seed,
            accuracy: metrics.accuracy,
            precision_0: c0.precision,
            recall_0: c0.recall,
            f1_0: c0.f1,
            precision_1: c1.precision,
            recall_1: c1.recall,
            f1_1: c1.f1,
            n_train,
            n_eval: metrics.total(),
        }
    }

    /// Row for the balanced evaluation set.
    pub fn balanced(report: &ExperimentReport) -> Self {
        Self::new(&report.config, &report.balanced, report.n_train())
    }

    /// Row for the full (unbalanced) evaluation set.
    pub fn unbalanced(report: &ExperimentReport) -> Self {
        Self::new(&report.config, &report.unbalanced, report.n_train())
    }
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    if rows.is_empty() {
        writer.write_record([
            "policy",
            "classifier",
            "z",
            "m",
            "dropped",
            "seed_balance",
            "seed_train",
            "accuracy",
            "precision_0",
            "recall_0",
            "f1_0",
            "precision_1",
            "recall_1",
            "f1_1",
            "n_train",
            "n_eval",
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_report_csv<R: Read>(source: R) -> csv::Result<Vec<ReportRow>> {
    csv::Reader::from_reader(source).deserialize().collect()
}

pub fn render_report_rows(rows: &[ReportRow]) -> String {
    let mut out = format!(
        "{:<34} {:<7} {:>4} {:>4} {:<16} {:>9} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7} {:>6}\n",
        "policy", "model", "z", "m", "dropped", "accuracy", "P0", "R0", "F1_0", "P1", "R1", "F1_1", "n_train", "n_eval"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<34} {:<7} {:>4} {:>4} {:<16} {:>9.4} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>7} {:>6}",
            r.policy,
            r.classifier,
            r.z,
            r.m,
            r.dropped,
            r.accuracy,
            r.precision_0,
            r.recall_0,
            r.f1_0,
            r.precision_1,
            r.recall_1,
            r.f1_1,
            r.n_train,
            r.n_eval
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub z: usize,
    pub m: usize,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepReject {
    pub z: usize,
    pub m: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub rejects: Vec<SweepReject>,
}

impl SweepTable {
    pub fn accuracy(&self, z: usize, m: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.z == z && r.m == m)
            .map(|r| r.report.balanced.accuracy)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:>5} {:>5} {:>9} {:>8}\n", "z", "m", "accuracy", "n_eval");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>5} {:>5} {:>9.4} {:>8}",
                r.z,
                r.m,
                r.report.balanced.accuracy,
                r.report.n_eval()
            );
        }
        for r in &self.rejects {
            let _ = writeln!(out, "{:>5} {:>5}  rejected: {}", r.z, r.m, r.reason);
        }
        out
    }
}

/// Run one experiment per `(z, m)` grid point with shared seeds. Cells that
/// fail are reported as rejects and never abort the sweep.
pub fn sweep_z(base: &ExperimentConfig, dataset: &Dataset, z_values: &[usize], m_values: &[usize]) -> SweepTable {
    let cells: BTreeSet<(usize, usize)> = z_values
        .iter()
        .flat_map(|&z| m_values.iter().map(move |&m| (z, m)))
        .collect();
    let results: Vec<((usize, usize), Result<ExperimentReport, EvalError>)> = cells
        .into_par_iter()
        .map(|(z, m)| {
            let mut cfg = base.clone();
            cfg.featurization.z = z;
            cfg.featurization.m = m;
            ((z, m), run_experiment(&cfg, dataset))
        })
        .collect();
    let mut table = SweepTable::default();
    for ((z, m), result) in results {
        match result {
            Ok(report) => table.rows.push(SweepRow { z, m, report }),
            Err(e) => table.rejects.push(SweepReject {
                z,
                m,
                reason: e.to_string(),
            }),
        }
    }
    table
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    /// `None` for the no-drop baseline.
    pub dropped: Option<Emotion>,
    pub accuracy: f64,
    /// Accuracy minus baseline accuracy.
    pub delta: f64,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn baseline(&self) -> &AblationRow {
        &self.rows[0]
    }

    pub fn delta(&self, emotion: Emotion) -> Option<f64> {
        self.rows.iter().find(|r| r.dropped == Some(emotion)).map(|r| r.delta)
    }

    /// The emotion whose removal costs the most accuracy.
    pub fn largest_decrease(&self) -> Option<Emotion> {
        self.rows
            .iter()
            .filter(|r| r.dropped.is_some())
            .min_by(|a, b| a.delta.total_cmp(&b.delta))
            .and_then(|r| r.dropped)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<10} {:>9} {:>9}\n", "dropped", "accuracy", "delta");
        for r in &self.rows {
            let name = r.dropped.map_or("baseline", Emotion::name);
            let _ = writeln!(out, "{:<10} {:>9.4} {:>+9.4}", name, r.accuracy, r.delta);
        }
        out
    }
}

/// Baseline plus one run per single-emotion drop, all with the same seeds.
pub fn ablate_emotions(base: &ExperimentConfig, dataset: &Dataset) -> Result<AblationTable, EvalError> {
    if !base.featurization.dropped_emotions.is_empty() {
        return Err(EvalError::InvalidConfig(
            "ablation baseline must not drop any emotion".into(),
        ));
    }
    let variants: Vec<Option<Emotion>> = std::iter::once(None).chain(Emotion::ALL.map(Some)).collect();
    let reports: Vec<ExperimentReport> = variants
        .par_iter()
        .map(|dropped| {
            let mut cfg = base.clone();
            cfg.featurization.dropped_emotions = dropped.iter().copied().collect();
            run_experiment(&cfg, dataset)
        })
        .collect::<Result<_, _>>()?;
    let baseline = reports[0].balanced.accuracy;
    let rows = variants
        .into_iter()
        .zip(reports)
        .map(|(dropped, report)| AblationRow {
            dropped,
            accuracy: report.balanced.accuracy,
            delta: report.balanced.accuracy - baseline,
            report,
        })
        .collect();
    Ok(AblationTable { rows })
}
