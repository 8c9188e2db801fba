use serde::{Deserialize, Serialize};

use super::{LearnError, TrainingSet};

/// Columns whose population stddev falls below this are treated as constant.
pub const CONSTANT_STDDEV: f64 = 1e-12;

/// Per-column z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl Standardizer {
    /// Population mean and stddev of each column. Requires at least 2 rows.
    pub fn fit(train: &TrainingSet) -> Result<Self, LearnError> {
        Self::fit_rows(train.features())
    }

    pub fn fit_rows(rows: &[Vec<f64>]) -> Result<Self, LearnError> {
        if rows.len() < 2 {
            return Err(LearnError::TooFewRows(rows.len()));
        }
        let n = rows.len() as f64;
        let dim = rows[0].len();
        let mut means = vec![0.0; dim];
        for row in rows {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stddevs = vec![0.0; dim];
        for row in rows {
            for ((s, x), m) in stddevs.iter_mut().zip(row).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        stddevs.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Ok(Self { means, stddevs })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn is_constant(&self, column: usize) -> bool {
        self.stddevs[column] < CONSTANT_STDDEV
    }

    /// Constant columns map to 0.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(x, (m, s))| if *s < CONSTANT_STDDEV { 0.0 } else { (x - m) / s })
            .collect()
    }

    pub fn transform_rows(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}
