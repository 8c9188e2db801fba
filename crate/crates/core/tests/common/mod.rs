//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use engage::PolicyId;
use engage::learn::{logreg_gradient, logreg_loss, mlp_gradient, mlp_loss, MlpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// `|a - b| / max(|a|, |b|)`, with the denominator floored so that two
/// components that are both numerically zero compare as equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Random rows in `[-1, 1]^dim` with labels from a noisy linear rule.
pub fn random_problem(seed: u64, rows: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut y: Vec<u8> = x
        .iter()
        .map(|r| u8::from(r.iter().enumerate().map(|(j, v)| v * (j as f64 - 1.5)).sum::<f64>() + rng.random_range(-0.5..0.5) > 0.0))
        .collect();
    y[0] = 0;
    y[1] = 1;
    (x, y)
}

/// Largest relative error between the analytic logistic-regression gradient
/// and central differences, at random non-zero parameters.
pub fn logreg_gradient_error(seed: u64) -> f64 {
    let (x, y) = random_problem(seed, 24, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let w: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = rng.random_range(-0.5..0.5);
    let l2 = 0.1;
    let (gw, gb) = logreg_gradient(&w, b, &x, &y, l2);
    let mut worst: f64 = 0.0;
    for j in 0..w.len() {
        let mut plus = w.clone();
        let mut minus = w.clone();
        plus[j] += FD_STEP;
        minus[j] -= FD_STEP;
        let numeric = (logreg_loss(&plus, b, &x, &y, l2) - logreg_loss(&minus, b, &x, &y, l2)) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(gw[j], numeric));
    }
    let numeric_b = (logreg_loss(&w, b + FD_STEP, &x, &y, l2) - logreg_loss(&w, b - FD_STEP, &x, &y, l2)) / (2.0 * FD_STEP);
    worst.max(relative_error(gb, numeric_b))
}

/// Same check for every MLP parameter.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let (x, y) = random_problem(seed, 16, 4);
    let mut model = MlpModel::init(4, 6, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
    let mut params = model.to_flat();
    // move biases off zero so the check covers them too
    params.iter_mut().for_each(|p| *p += rng.random_range(-0.1..0.1));
    model.set_flat(&params);
    let analytic = mlp_gradient(&model, &x, &y).1.to_flat();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut shifted = params.clone();
        shifted[i] = params[i] + FD_STEP;
        probe.set_flat(&shifted);
        let up = mlp_loss(&probe, &x, &y);
        shifted[i] = params[i] - FD_STEP;
        probe.set_flat(&shifted);
        let down = mlp_loss(&probe, &x, &y);
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

/// Table 3 written out as nested conditionals, independently of the rule tables.
pub fn oracle(policy: PolicyId, b: u8, e: u8, c: u8, f: u8) -> Option<u8> {
    let lift = |engaged: bool| Some(u8::from(engaged));
    match policy {
        PolicyId::Engagement => lift(e >= 2),
        PolicyId::Confusion => lift(c >= 1),
        PolicyId::Frustration => lift(f >= 1),
        PolicyId::EngagementBoredom => {
            if e == 0 {
                Some(0)
            } else if e == 3 {
                Some(1)
            } else if b >= 2 {
                Some(0)
            } else {
                None
            }
        }
        PolicyId::EngagementConfusion => match e {
            0 => Some(0),
            3 => Some(1),
            1 if c == 0 || c == 3 => Some(0),
            _ => Some(1),
        },
        PolicyId::EngagementFrustration => match e {
            0 => Some(0),
            3 => Some(1),
            1 if f == 0 || f == 3 => Some(0),
            _ => Some(1),
        },
        PolicyId::ConfusionFrustration => lift(!(f == 0 && c == 0)),
        PolicyId::ConfusionFrustrationEngagement => match e {
            0 => Some(0),
            3 => Some(1),
            1 if f == 3 || c == 3 || f == 0 || c == 0 => Some(0),
            _ => Some(1),
        },
    }
}

pub fn tuples() -> impl Iterator<Item = (u8, u8, u8, u8)> {
    (0..4u8).flat_map(|b| (0..4u8).flat_map(move |e| (0..4u8).flat_map(move |c| (0..4u8).map(move |f| (b, e, c, f)))))
}

