use serde::{Deserialize, Serialize};

use super::GradientSet;
use crate::nn::{HybridNetwork, Tensor};
use crate::{Error, Result};

/// Scales every gradient by `max_norm / g` when the global L2 norm `g`
/// exceeds `max_norm`.
pub fn clip_gradients(mut grads: GradientSet, max_norm: f64) -> GradientSet {
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    grads
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one tensor per parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn new(net: &HybridNetwork) -> Self {
        let zeros: Vec<Tensor> = net
            .params()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

/// One bias-corrected Adam update, followed by the IndRNN `|u| <= u_max` clamp.
pub fn adam_step(
    net: &mut HybridNetwork,
    grads: &GradientSet,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    let mut params = net.params_mut();
    if params.len() != grads.tensors().len() || params.len() != state.first_moment.len() {
        return Err(Error::shape("optimizer state does not match the network"));
    }
    for ((p, g), (m, v)) in params
        .iter()
        .zip(grads.tensors())
        .zip(state.first_moment.iter().zip(&state.second_moment))
    {
        if p.shape() != g.shape() || p.shape() != m.shape() || p.shape() != v.shape() {
            return Err(Error::shape("optimizer state does not match the network"));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads.tensors())
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for (((p, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    drop(params);
    net.clamp_recurrent();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, Activation, Architecture};

    fn net() -> HybridNetwork {
        init_network(
            &Architecture {
                input_width: 2,
                indrnn_widths: vec![3],
                lstm_width: 2,
                activation: Activation::Relu,
                candidate_tanh: false,
                u_max: 1.5,
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn clip_scales_only_above_threshold() {
        let n = net();
        let mut g = GradientSet::zeros_like(&n);
        g.tensors_mut()[0].data_mut()[0] = 1.0;
        let same = clip_gradients(g.clone(), 5.0);
        assert_eq!(same, g);
        g.tensors_mut()[0].data_mut()[0] = 10.0;
        let clipped = clip_gradients(g, 5.0);
        assert_eq!(clipped.tensors()[0].data()[0], 5.0);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut n = net();
        let before = n.clone();
        let mut state = AdamState::new(&n);
        let zero = GradientSet::zeros_like(&n);
        adam_step(&mut n, &zero, &mut state, &AdamConfig::default()).unwrap();
        assert_eq!(n, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut n = net();
        let before = n.head.b.data()[0];
        let mut g = GradientSet::zeros_like(&n);
        let last = g.tensors().len() - 1;
        g.tensors_mut()[last].data_mut()[0] = 0.3;
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(&n);
        adam_step(&mut n, &g, &mut state, &cfg).unwrap();
        // m_hat = g and v_hat = g^2 after bias correction
        let expected = before - cfg.learning_rate * 0.3 / (0.3 + cfg.epsilon);
        assert!((n.head.b.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn recurrent_weights_are_clamped() {
        let mut n = net();
        n.indrnn[0].u.data_mut()[0] = 1.9;
        let mut state = AdamState::new(&n);
        let zero = GradientSet::zeros_like(&n);
        adam_step(&mut n, &zero, &mut state, &AdamConfig::default()).unwrap();
        assert_eq!(n.indrnn[0].u.data()[0], 1.5);
    }
}
