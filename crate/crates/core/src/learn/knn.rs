use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_trainable, LearnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Manhattan,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            DistanceMetric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Manhattan => "manhattan",
        })
    }
}

impl FromStr for DistanceMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "manhattan" => Ok(DistanceMetric::Manhattan),
            _ => Err(format!("unknown metric '{s}' (expected euclidean or manhattan)")),
        }
    }
}

/// Majority vote over the `k` nearest stored rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub metric: DistanceMetric,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl KnnModel {
    /// `k` must be odd so binary votes cannot tie.
    pub fn fit(rows: Vec<Vec<f64>>, labels: Vec<u8>, k: usize, metric: DistanceMetric) -> Result<Self, LearnError> {
        if k == 0 || k.is_multiple_of(2) {
            return Err(LearnError::InvalidK(k));
        }
        if k > rows.len() {
            return Err(LearnError::KTooLarge { k, rows: rows.len() });
        }
        if rows.len() != labels.len() {
            return Err(LearnError::InvalidTrainingSet(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        Ok(Self { k, metric, rows, labels })
    }

    /// Like [`KnnModel::fit`] but also refuses single-class training data.
    pub fn fit_strict(rows: Vec<Vec<f64>>, labels: Vec<u8>, k: usize, metric: DistanceMetric) -> Result<Self, LearnError> {
        check_trainable(&rows, &labels)?;
        Self::fit(rows, labels, k, metric)
    }

    pub fn input_dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// `(distance, label)` of the `k` nearest rows, nearest first.
    ///
    /// Equal distances are ordered by label so the result does not depend on
    /// the order of the stored rows.
    pub fn neighbors(&self, query: &[f64]) -> Vec<(f64, u8)> {
        let mut all: Vec<(f64, u8)> = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(row, &y)| (self.metric.distance(row, query), y))
            .collect();
        let by_distance = |a: &(f64, u8), b: &(f64, u8)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < all.len() {
            all.select_nth_unstable_by(self.k - 1, by_distance);
            all.truncate(self.k);
        }
        all.sort_by(by_distance);
        all
    }

    /// Fraction of the `k` nearest neighbours labelled 1.
    pub fn score(&self, query: &[f64]) -> f64 {
        let neighbors = self.neighbors(query);
        let ones = neighbors.iter().filter(|(_, y)| *y == 1).count();
        match (2 * ones).cmp(&neighbors.len()) {
            Ordering::Equal => f64::from(neighbors[0].1),
            _ => ones as f64 / neighbors.len() as f64,
        }
    }
}
