//! Mean-squared-error training of the hybrid network by backpropagation
//! through time, with Adam, global-norm clipping and a finite-difference
//! gradient checker.

mod backward;
mod gradcheck;
mod optim;
mod trainer;

pub use backward::{backward, sample_gradient, GradientSet};
pub use gradcheck::{grad_check, grad_check_with, gradcheck_probe, min_relu_margin, GradCheckReport, TensorCheck};
pub use optim::{adam_step, clip_gradients, AdamConfig, AdamState};
pub use trainer::{train, Checkpoint, EpochStats, TrainConfig, TrainReport, Trainer};

use crate::{Error, Result};

/// Mean of squared differences.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::data(None, "empty prediction vector"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}
