use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_K_SIGMA: f64 = 3.0;

/// Residual threshold `tau = error_mean + k_sigma * error_std`, with the
/// population standard deviation of training absolute errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub error_mean: f64,
    pub error_std: f64,
    pub k_sigma: f64,
    pub threshold: f64,
}

impl ThresholdModel {
    pub fn fit(abs_errors: &[f64], k_sigma: f64) -> Result<Self> {
        if abs_errors.len() < 2 {
            return Err(Error::data(None, "threshold fit needs at least two errors"));
        }
        if !(k_sigma > 0.0 && k_sigma.is_finite()) {
            return Err(Error::config(format!("k_sigma {k_sigma} must be positive")));
        }
        if abs_errors.iter().any(|e| !e.is_finite()) {
            return Err(Error::data(None, "threshold fit got a non-finite error"));
        }
        let n = abs_errors.len() as f64;
        let error_mean = abs_errors.iter().sum::<f64>() / n;
        let var = abs_errors.iter().map(|e| (e - error_mean).powi(2)).sum::<f64>() / n;
        let error_std = var.sqrt();
        Ok(Self {
            error_mean,
            error_std,
            k_sigma,
            threshold: error_mean + k_sigma * error_std,
        })
    }

    /// A fixed threshold, with no fitted statistics behind it.
    pub fn fixed(threshold: f64) -> Self {
        Self {
            error_mean: threshold,
            error_std: 0.0,
            k_sigma: DEFAULT_K_SIGMA,
            threshold,
        }
    }

    pub fn is_anomaly(&self, abs_error: f64) -> bool {
        abs_error > self.threshold
    }
}

pub fn fit_threshold(abs_errors: &[f64], k_sigma: f64) -> Result<ThresholdModel> {
    ThresholdModel::fit(abs_errors, k_sigma)
}
