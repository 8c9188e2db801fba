use serde::{Deserialize, Serialize};

use super::{check_trainable, logit_cross_entropy, sigmoid, LearnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn logit(weights: &[f64], bias: f64, row: &[f64]) -> f64 {
    bias + weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
}

/// Mean cross-entropy plus `l2 / 2 * |w|^2` (bias not penalized).
pub fn logreg_loss(weights: &[f64], bias: f64, rows: &[Vec<f64>], labels: &[u8], l2: f64) -> f64 {
    let n = rows.len() as f64;
    let data: f64 = rows
        .iter()
        .zip(labels)
        .map(|(row, &y)| logit_cross_entropy(logit(weights, bias, row), y))
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`logreg_loss`] with respect to `(weights, bias)`.
pub fn logreg_gradient(weights: &[f64], bias: f64, rows: &[Vec<f64>], labels: &[u8], l2: f64) -> (Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, &y) in rows.iter().zip(labels) {
        let residual = sigmoid(logit(weights, bias, row)) - f64::from(y);
        grad_b += residual;
        for (g, x) in grad_w.iter_mut().zip(row) {
            *g += residual * x;
        }
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (grad_w, grad_b / n)
}

impl LogisticModel {
    /// Full-batch gradient descent from zero weights. Returns the model and
    /// the loss before each epoch followed by the final loss.
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[u8],
        epochs: usize,
        learning_rate: f64,
        l2: f64,
    ) -> Result<(Self, Vec<f64>), LearnError> {
        check_trainable(rows, labels)?;
        if !(learning_rate > 0.0 && learning_rate.is_finite()) || !(l2 >= 0.0 && l2.is_finite()) {
            return Err(LearnError::InvalidHyperparameter(format!(
                "learning_rate={learning_rate}, l2={l2}"
            )));
        }
        let dim = rows[0].len();
        let mut weights = vec![0.0; dim];
        let mut bias = 0.0;
        let mut history = Vec::with_capacity(epochs + 1);
        for _ in 0..epochs {
            history.push(logreg_loss(&weights, bias, rows, labels, l2));
            let (gw, gb) = logreg_gradient(&weights, bias, rows, labels, l2);
            for (w, g) in weights.iter_mut().zip(&gw) {
                *w -= learning_rate * g;
            }
            bias -= learning_rate * gb;
        }
        history.push(logreg_loss(&weights, bias, rows, labels, l2));
        Ok((Self { weights, bias }, history))
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(logit(&self.weights, self.bias, row))
    }
}
