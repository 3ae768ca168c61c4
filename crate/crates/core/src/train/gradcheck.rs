use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::sample_gradient;
use crate::nn::{init_network, Activation, Architecture, HybridNetwork};
use crate::{Error, Result};

/// Worst entry of one parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
    }
}

fn relative_error(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-8)
}

/// Compares analytic gradients of `(prediction - target)^2` with central
/// finite differences, parameter by parameter.
pub fn grad_check(net: &HybridNetwork, window: &[f64], target: f64, epsilon: f64) -> Result<GradCheckReport> {
    grad_check_with(net, window, target, epsilon, None)
}

/// As [`grad_check`]; `corrupt` doubles the analytic gradient of the named
/// tensor, to confirm the checker notices.
pub fn grad_check_with(
    net: &HybridNetwork,
    window: &[f64],
    target: f64,
    epsilon: f64,
    corrupt: Option<&str>,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::config("epsilon must lie in (0, 1e-3]"));
    }
    let (mut grads, _) = sample_gradient(net, window, target)?;
    if let Some(name) = corrupt {
        let idx = grads
            .names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config(format!("no tensor named {name}")))?;
        grads.tensors_mut()[idx].scale(2.0);
    }
    let loss = |n: &HybridNetwork| -> Result<f64> {
        let r = n.forward(window)? - target;
        Ok(r * r)
    };

    let mut probe = net.clone();
    let mut tensors = Vec::new();
    for (ti, name) in net.param_names().into_iter().enumerate() {
        let analytic = grads.tensors()[ti].data();
        let mut worst = TensorCheck {
            name,
            max_relative_error: 0.0,
            worst_index: 0,
            analytic: analytic.first().copied().unwrap_or(0.0),
            numeric: 0.0,
        };
        for (j, &a) in analytic.iter().enumerate() {
            let original = probe.params_mut()[ti].data()[j];
            probe.params_mut()[ti].data_mut()[j] = original + epsilon;
            let up = loss(&probe)?;
            probe.params_mut()[ti].data_mut()[j] = original - epsilon;
            let down = loss(&probe)?;
            probe.params_mut()[ti].data_mut()[j] = original;
            let numeric = (up - down) / (2.0 * epsilon);
            let err = relative_error(a, numeric);
            if err > worst.max_relative_error || j == 0 {
                worst = TensorCheck {
                    max_relative_error: err,
                    worst_index: j,
                    analytic: a,
                    numeric,
                    ..worst
                };
            }
        }
        tensors.push(worst);
    }
    let max_relative_error = tensors.iter().map(|t| t.max_relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        tensors,
    })
}

/// Smallest `|preactivation|` over relu IndRNN units for `window`; infinite
/// when no layer uses relu. Finite differences are unreliable near 0.
pub fn min_relu_margin(net: &HybridNetwork, window: &[f64]) -> Result<f64> {
    let trace = net.trace(window)?;
    Ok(net
        .indrnn
        .iter()
        .zip(&trace.indrnn)
        .filter(|(l, _)| l.activation == Activation::Relu)
        .flat_map(|(_, t)| t.pre.iter())
        .fold(f64::INFINITY, |m, p| m.min(p.abs())))
}

/// Seeded network, window and target for a gradient check. Inputs and target
/// are uniform on `[-1, 1]`; windows that put a relu pre-activation within
/// `margin` of its kink are redrawn, up to 1000 times.
pub fn gradcheck_probe(
    arch: &Architecture,
    window_length: usize,
    seed: u64,
    margin: f64,
) -> Result<(HybridNetwork, Vec<f64>, f64)> {
    let net = init_network(arch, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for _ in 0..1000 {
        let window: Vec<f64> = (0..window_length * arch.input_width)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let target = rng.random_range(-1.0..=1.0);
        if min_relu_margin(&net, &window)? > margin {
            return Ok((net, window, target));
        }
    }
    Err(Error::config(format!(
        "no window keeps relu pre-activations {margin} away from zero"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Architecture {
        Architecture {
            input_width: 3,
            indrnn_widths: vec![4, 3],
            lstm_width: 3,
            activation: Activation::Relu,
            candidate_tanh: false,
            u_max: 1.2,
        }
    }

    #[test]
    fn analytic_matches_numeric() {
        for seed in 0..3 {
            let (net, w, t) = gradcheck_probe(&small(), 5, seed, 1e-4).unwrap();
            let r = grad_check(&net, &w, t, 1e-5).unwrap();
            assert!(r.max_relative_error < 1e-4, "seed {seed}: {:?}", r.worst());
            assert_eq!(r.tensors.len(), net.param_names().len());
        }
    }

    #[test]
    fn doubled_tensor_reads_one_half() {
        let (net, w, t) = gradcheck_probe(&small(), 5, 7, 1e-4).unwrap();
        let r = grad_check_with(&net, &w, t, 1e-5, Some("lstm.u_o")).unwrap();
        let worst = r.worst().unwrap();
        assert_eq!(worst.name, "lstm.u_o");
        assert!((worst.max_relative_error - 0.5).abs() < 1e-3, "{worst:?}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let (net, w, t) = gradcheck_probe(&small(), 5, 1, 1e-4).unwrap();
        assert!(grad_check(&net, &w, t, 0.1).is_err());
        assert!(grad_check_with(&net, &w, t, 1e-5, Some("nope")).is_err());
    }

    #[test]
    fn tanh_and_sigmoid_activations() {
        for act in [Activation::Tanh, Activation::Sigmoid] {
            let arch = Architecture {
                activation: act,
                candidate_tanh: true,
                ..small()
            };
            let (net, w, t) = gradcheck_probe(&arch, 4, 3, 1e-4).unwrap();
            assert!(grad_check(&net, &w, t, 1e-5).unwrap().max_relative_error < 1e-4);
        }
    }
}
