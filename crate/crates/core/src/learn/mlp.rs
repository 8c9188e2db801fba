use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_trainable, logit_cross_entropy, sigmoid, LearnError};

/// One hidden ReLU layer feeding a single sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `hidden x input` weights.
    pub hidden_weights: Vec<Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl MlpModel {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let in_bound = 1.0 / (input.max(1) as f64).sqrt();
        let out_bound = 1.0 / (hidden.max(1) as f64).sqrt();
        let hidden_weights = (0..hidden)
            .map(|_| (0..input).map(|_| rng.random_range(-in_bound..=in_bound)).collect())
            .collect();
        let output_weights = (0..hidden).map(|_| rng.random_range(-out_bound..=out_bound)).collect();
        Self {
            hidden_weights,
            hidden_bias: vec![0.0; hidden],
            output_weights,
            output_bias: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_weights.first().map_or(0, Vec::len)
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_bias.len()
    }

    fn hidden_activations(&self, row: &[f64]) -> Vec<f64> {
        self.hidden_weights
            .iter()
            .zip(&self.hidden_bias)
            .map(|(w, b)| (b + w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>()).max(0.0))
            .collect()
    }

    fn output_logit(&self, hidden: &[f64]) -> f64 {
        self.output_bias + self.output_weights.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.output_logit(&self.hidden_activations(row)))
    }

    /// All parameters as one vector: hidden weights (row-major), hidden
    /// biases, output weights, output bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.hidden_weights.iter().flatten().copied().collect();
        out.extend(&self.hidden_bias);
        out.extend(&self.output_weights);
        out.push(self.output_bias);
        out
    }

    /// Inverse of [`MlpModel::to_flat`] for a model of the same shape.
    pub fn set_flat(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for w in self.hidden_weights.iter_mut().flatten() {
            *w = it.next().expect("parameter vector too short");
        }
        for b in &mut self.hidden_bias {
            *b = it.next().expect("parameter vector too short");
        }
        for w in &mut self.output_weights {
            *w = it.next().expect("parameter vector too short");
        }
        self.output_bias = it.next().expect("parameter vector too short");
        assert!(it.next().is_none(), "parameter vector too long");
    }

    fn step(&mut self, grad: &MlpModel, learning_rate: f64) {
        for (w, g) in self.hidden_weights.iter_mut().flatten().zip(grad.hidden_weights.iter().flatten()) {
            *w -= learning_rate * g;
        }
        for (b, g) in self.hidden_bias.iter_mut().zip(&grad.hidden_bias) {
            *b -= learning_rate * g;
        }
        for (w, g) in self.output_weights.iter_mut().zip(&grad.output_weights) {
            *w -= learning_rate * g;
        }
        self.output_bias -= learning_rate * grad.output_bias;
    }

    /// Full-batch gradient descent on mean cross-entropy. Returns the model
    /// and the loss before each epoch followed by the final loss.
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[u8],
        hidden: usize,
        epochs: usize,
        learning_rate: f64,
        seed: u64,
    ) -> Result<(Self, Vec<f64>), LearnError> {
        check_trainable(rows, labels)?;
        if hidden == 0 || !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(LearnError::InvalidHyperparameter(format!(
                "hidden={hidden}, learning_rate={learning_rate}"
            )));
        }
        let mut model = Self::init(rows[0].len(), hidden, seed);
        let mut history = Vec::with_capacity(epochs + 1);
        for _ in 0..epochs {
            let (loss, grad) = mlp_gradient(&model, rows, labels);
            history.push(loss);
            model.step(&grad, learning_rate);
        }
        history.push(mlp_loss(&model, rows, labels));
        Ok((model, history))
    }
}

pub fn mlp_loss(model: &MlpModel, rows: &[Vec<f64>], labels: &[u8]) -> f64 {
    rows.iter()
        .zip(labels)
        .map(|(row, &y)| logit_cross_entropy(model.output_logit(&model.hidden_activations(row)), y))
        .sum::<f64>()
        / rows.len() as f64
}

/// Loss and its backpropagated gradient, returned in the model's own shape.
pub fn mlp_gradient(model: &MlpModel, rows: &[Vec<f64>], labels: &[u8]) -> (f64, MlpModel) {
    let n = rows.len() as f64;
    let mut grad = MlpModel {
        hidden_weights: vec![vec![0.0; model.input_dim()]; model.hidden_dim()],
        hidden_bias: vec![0.0; model.hidden_dim()],
        output_weights: vec![0.0; model.hidden_dim()],
        output_bias: 0.0,
    };
    let mut loss = 0.0;
    for (row, &y) in rows.iter().zip(labels) {
        let hidden = model.hidden_activations(row);
        let z = model.output_logit(&hidden);
        loss += logit_cross_entropy(z, y);
        let delta_out = sigmoid(z) - f64::from(y);
        grad.output_bias += delta_out;
        for (j, h) in hidden.iter().enumerate() {
            grad.output_weights[j] += delta_out * h;
            if *h > 0.0 {
                let delta_h = delta_out * model.output_weights[j];
                grad.hidden_bias[j] += delta_h;
                for (g, x) in grad.hidden_weights[j].iter_mut().zip(row) {
                    *g += delta_h * x;
                }
            }
        }
    }
    for g in grad.hidden_weights.iter_mut().flatten() {
        *g /= n;
    }
    grad.hidden_bias.iter_mut().for_each(|g| *g /= n);
    grad.output_weights.iter_mut().for_each(|g| *g /= n);
    grad.output_bias /= n;
    (loss / n, grad)
}
