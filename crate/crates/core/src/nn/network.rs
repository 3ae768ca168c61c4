use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Activation, DenseLayer, IndRnnLayer, IndRnnTrace, LstmLayer, LstmTrace, Tensor, GATE_NAMES};
use crate::{Error, Result};

/// Layer widths and options of a [`HybridNetwork`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Features per time step (`F`).
    pub input_width: usize,
    pub indrnn_widths: Vec<usize>,
    pub lstm_width: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub candidate_tanh: bool,
    pub u_max: f64,
}

impl Architecture {
    /// Two IndRNN layers of 64, an LSTM of 64, relu, linear candidate.
    pub fn default_for(input_width: usize, window_length: usize) -> Self {
        Self {
            input_width,
            indrnn_widths: vec![64, 64],
            lstm_width: 64,
            activation: Activation::Relu,
            candidate_tanh: false,
            u_max: super::default_u_max(window_length),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.lstm_width == 0 {
            return Err(Error::config("layer widths must be positive"));
        }
        if self.indrnn_widths.is_empty() || self.indrnn_widths.contains(&0) {
            return Err(Error::config("need at least one IndRNN layer, all widths positive"));
        }
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(Error::config("u_max must be positive and finite"));
        }
        Ok(())
    }
}

/// IndRNN stack -> LSTM -> dense head. The head reads the LSTM hidden state of
/// the last time step only.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridNetwork {
    pub indrnn: Vec<IndRnnLayer>,
    pub lstm: LstmLayer,
    pub head: DenseLayer,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct NetworkTrace {
    pub indrnn: Vec<IndRnnTrace>,
    pub lstm: LstmTrace,
    pub prediction: f64,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, limit: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized by construction")
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform weights, recurrent weights `u ~ U(0, 1]`, zero biases except
/// a forget-gate bias of 1. Deterministic in `seed`.
pub fn init_network(arch: &Architecture, seed: u64) -> Result<HybridNetwork> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indrnn = Vec::with_capacity(arch.indrnn_widths.len());
    let mut fan_in = arch.input_width;
    for &n in &arch.indrnn_widths {
        let w = uniform(&mut rng, n, fan_in, glorot(fan_in, n));
        let u = Tensor::column((0..n).map(|_| 1.0 - rng.random::<f64>()).collect());
        indrnn.push(IndRnnLayer::new(w, u, Tensor::zeros(n, 1), arch.activation, arch.u_max)?);
        fan_in = n;
    }
    let m = arch.lstm_width;
    let w = std::array::from_fn(|_| uniform(&mut rng, m, fan_in, glorot(fan_in, m)));
    let u = std::array::from_fn(|_| uniform(&mut rng, m, m, glorot(m, m)));
    let mut b: [Tensor; 4] = std::array::from_fn(|_| Tensor::zeros(m, 1));
    b[0] = Tensor::filled(m, 1, 1.0);
    let lstm = LstmLayer::new(w, u, b, arch.candidate_tanh)?;
    let head_limit = glorot(m, 1);
    let head = DenseLayer::new((0..m).map(|_| rng.random_range(-head_limit..head_limit)).collect(), 0.0)?;
    HybridNetwork::new(indrnn, lstm, head)
}

impl HybridNetwork {
    pub fn new(indrnn: Vec<IndRnnLayer>, lstm: LstmLayer, head: DenseLayer) -> Result<Self> {
        let first = indrnn
            .first()
            .ok_or_else(|| Error::shape("network needs at least one IndRNN layer"))?;
        let mut width = first.width();
        for (i, layer) in indrnn.iter().enumerate().skip(1) {
            if layer.input_width() != width {
                return Err(Error::shape(format!(
                    "IndRNN layer {i} expects {} inputs, previous layer has {width}",
                    layer.input_width()
                )));
            }
            width = layer.width();
        }
        if lstm.input_width() != width {
            return Err(Error::shape(format!(
                "LSTM expects {} inputs, IndRNN stack outputs {width}",
                lstm.input_width()
            )));
        }
        if head.input_width() != lstm.width() {
            return Err(Error::shape(format!(
                "head expects {} inputs, LSTM has {}",
                head.input_width(),
                lstm.width()
            )));
        }
        let net = Self { indrnn, lstm, head };
        if !net.params().iter().all(|(_, t)| t.is_finite()) {
            return Err(Error::data(None, "network parameters must be finite"));
        }
        Ok(net)
    }

    pub fn input_width(&self) -> usize {
        self.indrnn[0].input_width()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_width: self.input_width(),
            indrnn_widths: self.indrnn.iter().map(IndRnnLayer::width).collect(),
            lstm_width: self.lstm.width(),
            activation: self.indrnn[0].activation,
            candidate_tanh: self.lstm.candidate_tanh,
            u_max: self.indrnn[0].u_max,
        }
    }

    /// Predicts the next target value from an `L x F` row-major window.
    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        Ok(self.trace(window)?.prediction)
    }

    /// Forward pass keeping every intermediate, failing on non-finite values.
    pub fn trace(&self, window: &[f64]) -> Result<NetworkTrace> {
        let f = self.input_width();
        if window.is_empty() || window.len() % f != 0 {
            return Err(Error::shape(format!(
                "window of {} values does not match {f} features per step",
                window.len()
            )));
        }
        let mut traces: Vec<IndRnnTrace> = Vec::with_capacity(self.indrnn.len());
        for (i, layer) in self.indrnn.iter().enumerate() {
            let input = traces.last().map_or(window, |t| &t.hidden[..]);
            let tr = layer.forward(input, None)?;
            check_finite(&tr.hidden, layer.width(), || format!("indrnn.{i}"))?;
            traces.push(tr);
        }
        let lstm = self
            .lstm
            .forward(&traces.last().expect("non-empty stack").hidden, None, None)?;
        check_finite(&lstm.cell, self.lstm.width(), || "lstm".to_owned())?;
        let prediction = self.head.forward(lstm.last_hidden())?;
        if !prediction.is_finite() {
            return Err(Error::NonFinite {
                layer: "head".into(),
                step: lstm.steps.saturating_sub(1),
            });
        }
        Ok(NetworkTrace {
            indrnn: traces,
            lstm,
            prediction,
        })
    }

    /// Canonical tensor names, in the order used by [`Self::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.indrnn.len() {
            for p in ["w", "u", "b"] {
                names.push(format!("indrnn.{i}.{p}"));
            }
        }
        for kind in ["w", "u", "b"] {
            for g in GATE_NAMES {
                names.push(format!("lstm.{kind}_{g}"));
            }
        }
        names.push("head.w".into());
        names.push("head.b".into());
        names
    }

    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut tensors: Vec<&Tensor> = Vec::new();
        for l in &self.indrnn {
            tensors.extend([&l.w, &l.u, &l.b]);
        }
        tensors.extend(self.lstm.w.iter());
        tensors.extend(self.lstm.u.iter());
        tensors.extend(self.lstm.b.iter());
        tensors.extend([&self.head.w, &self.head.b]);
        self.param_names().into_iter().zip(tensors).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut tensors: Vec<&mut Tensor> = Vec::new();
        for l in &mut self.indrnn {
            tensors.extend([&mut l.w, &mut l.u, &mut l.b]);
        }
        tensors.extend(self.lstm.w.iter_mut());
        tensors.extend(self.lstm.u.iter_mut());
        tensors.extend(self.lstm.b.iter_mut());
        tensors.extend([&mut self.head.w, &mut self.head.b]);
        tensors
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Re-applies `|u| <= u_max` on every IndRNN layer.
    pub fn clamp_recurrent(&mut self) {
        for l in &mut self.indrnn {
            l.clamp_recurrent();
        }
    }

    pub fn max_abs_u(&self) -> f64 {
        self.indrnn
            .iter()
            .flat_map(|l| l.u.data())
            .fold(0.0, |acc, u| acc.max(u.abs()))
    }

    /// SHA-256 over every parameter's little-endian bits, canonical order.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for (_, t) in self.params() {
            for v in t.data() {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            architecture: self.architecture(),
            tensors: self
                .params()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    rows: t.rows(),
                    cols: t.cols(),
                    values: t.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &NetworkDocument) -> Result<Self> {
        let mut net = init_network(&doc.architecture, 0)?;
        let names = net.param_names();
        if doc.tensors.len() != names.len() {
            return Err(Error::shape(format!(
                "document has {} tensors, architecture needs {}",
                doc.tensors.len(),
                names.len()
            )));
        }
        for ((slot, name), stored) in net.params_mut().into_iter().zip(&names).zip(&doc.tensors) {
            if &stored.name != name || (stored.rows, stored.cols) != slot.shape() {
                return Err(Error::shape(format!(
                    "tensor {} ({}x{}) does not match expected {name} {:?}",
                    stored.name,
                    stored.rows,
                    stored.cols,
                    slot.shape()
                )));
            }
            *slot = Tensor::from_vec(stored.rows, stored.cols, stored.values.clone())?;
        }
        if net.max_abs_u() > doc.architecture.u_max {
            return Err(Error::data(None, "stored recurrent weight exceeds u_max"));
        }
        HybridNetwork::new(net.indrnn, net.lstm, net.head)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

fn check_finite(values: &[f64], width: usize, layer: impl FnOnce() -> String) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(pos) => Err(Error::NonFinite {
            layer: layer(),
            step: pos / width,
        }),
    }
}

/// Serialized network: architecture plus flat row-major tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub architecture: Architecture,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_arch() -> Architecture {
        Architecture {
            input_width: 3,
            indrnn_widths: vec![5, 4],
            lstm_width: 6,
            activation: Activation::Relu,
            candidate_tanh: false,
            u_max: 1.2,
        }
    }

    fn window(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn init_is_deterministic_and_follows_rules() {
        let a = init_network(&small_arch(), 42).unwrap();
        let b = init_network(&small_arch(), 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_network(&small_arch(), 43).unwrap());
        for l in &a.indrnn {
            assert!(l.u.data().iter().all(|&u| u > 0.0 && u <= 1.0));
            assert!(l.b.data().iter().all(|&b| b == 0.0));
        }
        assert!(a.lstm.b[0].data().iter().all(|&b| b == 1.0));
        assert!(a.lstm.b[1..].iter().all(|t| t.data().iter().all(|&b| b == 0.0)));
        let limit = glorot(3, 5);
        assert!(a.indrnn[0].w.data().iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn zero_network_predicts_head_bias() {
        let mut net = init_network(&small_arch(), 1).unwrap();
        for t in net.params_mut() {
            t.scale(0.0);
        }
        net.head.b = Tensor::filled(1, 1, 0.75);
        assert_eq!(net.forward(&window(3 * 7, 2)).unwrap(), 0.75);
    }

    #[test]
    fn identity_indrnn_passes_inputs_through() {
        let mut net = init_network(&small_arch(), 5).unwrap();
        net.indrnn = vec![IndRnnLayer::new(
            Tensor::identity(3),
            Tensor::zeros(3, 1),
            Tensor::zeros(3, 1),
            Activation::Identity,
            1.0,
        )
        .unwrap()];
        net.lstm = init_network(
            &Architecture {
                indrnn_widths: vec![3],
                ..small_arch()
            },
            5,
        )
        .unwrap()
        .lstm;
        let net = HybridNetwork::new(net.indrnn, net.lstm, net.head).unwrap();
        let x = window(12, 3);
        let tr = net.trace(&x).unwrap();
        assert_eq!(tr.indrnn[0].hidden, x);
        let direct = net.lstm.forward(&x, None, None).unwrap();
        assert_eq!(direct.hidden, tr.lstm.hidden);
    }

    #[test]
    fn layer_mismatch_rejected() {
        let net = init_network(&small_arch(), 1).unwrap();
        let mut indrnn = net.indrnn.clone();
        indrnn.pop();
        assert!(HybridNetwork::new(indrnn, net.lstm.clone(), net.head.clone()).is_err());
        assert!(net.forward(&[1.0, 2.0]).is_err());
        assert!(net.forward(&[]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let net = init_network(&small_arch(), 9).unwrap();
        let text = net.to_json().unwrap();
        let back = HybridNetwork::from_json(&text).unwrap();
        assert_eq!(net, back);
        let x = window(3 * 10, 4);
        assert_eq!(net.forward(&x).unwrap().to_bits(), back.forward(&x).unwrap().to_bits());
        assert_eq!(net.checksum(), back.checksum());
    }

    #[test]
    fn param_names_align_with_tensors() {
        let net = init_network(&small_arch(), 1).unwrap();
        let params = net.params();
        assert_eq!(params.len(), 2 * 3 + 12 + 2);
        assert_eq!(params[0].0, "indrnn.0.w");
        assert_eq!(params[0].1.shape(), (5, 3));
        assert_eq!(params[6].0, "lstm.w_f");
        assert_eq!(params[10].1.shape(), (6, 6));
        assert_eq!(params.last().unwrap().0, "head.b");
    }
}
