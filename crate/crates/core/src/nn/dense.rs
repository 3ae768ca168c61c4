use serde::{Deserialize, Serialize};

use super::tensor::dot;
use super::Tensor;
use crate::{Error, Result};

/// Affine scalar head: `w . h + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `1 x m`.
    pub w: Tensor,
    /// `1 x 1`.
    pub b: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::shape("dense head needs at least one input"));
        }
        Ok(Self {
            w: Tensor::from_vec(1, weights.len(), weights)?,
            b: Tensor::filled(1, 1, bias),
        })
    }

    pub fn input_width(&self) -> usize {
        self.w.cols()
    }

    pub fn bias(&self) -> f64 {
        self.b.data()[0]
    }

    pub fn forward(&self, h: &[f64]) -> Result<f64> {
        if h.len() != self.input_width() {
            return Err(Error::shape(format!(
                "dense head expects {} inputs, got {}",
                self.input_width(),
                h.len()
            )));
        }
        Ok(dot(self.w.data(), h) + self.bias())
    }
}
