//! Layers of the hybrid forecaster: an IndRNN stack feeding an LSTM whose last
//! hidden state drives a scalar dense head.

mod activation;
mod dense;
mod indrnn;
mod lstm;
mod network;
mod tensor;

pub use activation::Activation;
pub use dense::DenseLayer;
pub use indrnn::{IndRnnLayer, IndRnnTrace};
pub use lstm::{LstmLayer, LstmTrace, GATE_NAMES};
pub use network::{init_network, Architecture, HybridNetwork, NamedTensor, NetworkDocument, NetworkTrace};
pub use tensor::Tensor;

/// Recurrent-weight bound for a window of `window_length` steps: `2^(1/L)`,
/// which keeps `|u|^L <= 2`.
pub fn default_u_max(window_length: usize) -> f64 {
    2f64.powf(1.0 / window_length.max(1) as f64)
}
