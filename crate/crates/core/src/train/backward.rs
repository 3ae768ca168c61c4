use rayon::prelude::*;

use crate::nn::{HybridNetwork, NetworkTrace, Tensor};
use crate::{Error, Result};

/// One gradient tensor per network parameter tensor, in the network's
/// canonical order (see [`HybridNetwork::params`]).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl GradientSet {
    pub fn zeros_like(net: &HybridNetwork) -> Self {
        let (names, tensors) = net
            .params()
            .into_iter()
            .map(|(name, t)| (name, Tensor::zeros(t.rows(), t.cols())))
            .unzip();
        Self { names, tensors }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.scale(factor);
        }
    }

    /// Global L2 norm across every tensor.
    pub fn norm(&self) -> f64 {
        self.tensors.iter().map(Tensor::sum_squares).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

/// Squared error of one sample and its gradient, unscaled.
pub fn sample_gradient(net: &HybridNetwork, window: &[f64], target: f64) -> Result<(GradientSet, f64)> {
    let trace = net.trace(window)?;
    let residual = trace.prediction - target;
    let mut grads = GradientSet::zeros_like(net);
    accumulate(net, &trace, window, 2.0 * residual, &mut grads);
    Ok((grads, residual * residual))
}

/// Gradient of the mean squared error over `batch`, and that loss.
///
/// Per-sample gradients may be computed in parallel; they are summed in
/// ascending sample order so the result does not depend on thread count.
pub fn backward(net: &HybridNetwork, batch: &[(&[f64], f64)]) -> Result<(GradientSet, f64)> {
    if batch.is_empty() {
        return Err(Error::data(None, "empty batch"));
    }
    let per_sample: Vec<(GradientSet, f64)> = batch
        .par_iter()
        .map(|&(w, y)| sample_gradient(net, w, y))
        .collect::<Result<_>>()?;
    let mut iter = per_sample.into_iter();
    let (mut total, mut loss) = iter.next().expect("non-empty batch");
    for (g, l) in iter {
        total.add_assign(&g);
        loss += l;
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    if !total.is_finite() {
        return Err(Error::NonFinite {
            layer: "gradients".into(),
            step: 0,
        });
    }
    Ok((total, loss / n))
}

/// Reverse accumulation of `d_prediction * d prediction / d params` into `grads`.
fn accumulate(net: &HybridNetwork, trace: &NetworkTrace, window: &[f64], d_pred: f64, grads: &mut GradientSet) {
    let n_ind = net.indrnn.len();
    let lstm_base = 3 * n_ind;
    let head_base = lstm_base + 12;
    let t = &mut grads.tensors;

    // head
    let h_last = trace.lstm.last_hidden();
    for (g, &h) in t[head_base].data_mut().iter_mut().zip(h_last) {
        *g += d_pred * h;
    }
    t[head_base + 1].data_mut()[0] += d_pred;
    let dh_last: Vec<f64> = net.head.w.data().iter().map(|w| d_pred * w).collect();

    // LSTM, unrolled backwards
    let lstm = &net.lstm;
    let tr = &trace.lstm;
    let (m, n) = (lstm.width(), lstm.input_width());
    let steps = tr.steps;
    let lstm_in = &trace.indrnn[n_ind - 1].hidden;
    let mut d_seq = vec![0.0; steps * n];
    let mut dh_next = vec![0.0; m];
    let mut dc_next = vec![0.0; m];
    let mut da = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    for step in (0..steps).rev() {
        let r = step * m..(step + 1) * m;
        let (f, i, o) = (&tr.forget[r.clone()], &tr.input[r.clone()], &tr.output[r.clone()]);
        let (g, tc) = (&tr.candidate[r.clone()], &tr.tanh_cell[r.clone()]);
        let c_prev = tr.cell_at(step.checked_sub(1));
        let h_prev = tr.hidden_at(step.checked_sub(1));
        let x = &lstm_in[step * n..(step + 1) * n];
        for k in 0..m {
            let dh = dh_next[k] + if step + 1 == steps { dh_last[k] } else { 0.0 };
            let d_o = dh * tc[k];
            let dc = dc_next[k] + dh * o[k] * (1.0 - tc[k] * tc[k]);
            da[0][k] = dc * c_prev[k] * f[k] * (1.0 - f[k]);
            da[1][k] = dc * g[k] * i[k] * (1.0 - i[k]);
            da[2][k] = d_o * o[k] * (1.0 - o[k]);
            let dg = dc * i[k];
            da[3][k] = if lstm.candidate_tanh { dg * (1.0 - g[k] * g[k]) } else { dg };
            dc_next[k] = dc * f[k];
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let dx = &mut d_seq[step * n..(step + 1) * n];
        for gate in 0..4 {
            t[lstm_base + gate].outer_acc(&da[gate], x);
            t[lstm_base + 4 + gate].outer_acc(&da[gate], h_prev);
            for (b, d) in t[lstm_base + 8 + gate].data_mut().iter_mut().zip(&da[gate]) {
                *b += d;
            }
            lstm.w[gate].matvec_t_acc(&da[gate], dx);
            lstm.u[gate].matvec_t_acc(&da[gate], &mut dh_next);
        }
    }

    // IndRNN stack, top layer first; each neuron's recurrence is a scalar chain
    let mut d_out = d_seq;
    for l in (0..n_ind).rev() {
        let layer = &net.indrnn[l];
        let ltr = &trace.indrnn[l];
        let (nn, mm) = (layer.width(), layer.input_width());
        let input: &[f64] = if l == 0 { window } else { &trace.indrnn[l - 1].hidden };
        let mut d_in = if l > 0 { vec![0.0; steps * mm] } else { Vec::new() };
        let mut carry = vec![0.0; nn];
        let mut d_a = vec![0.0; nn];
        let u = layer.u.data();
        for step in (0..steps).rev() {
            let pre = &ltr.pre[step * nn..(step + 1) * nn];
            let h_prev = ltr.state(step.checked_sub(1));
            for k in 0..nn {
                d_a[k] = (d_out[step * nn + k] + carry[k]) * layer.activation.derivative(pre[k]);
                carry[k] = d_a[k] * u[k];
            }
            let x = &input[step * mm..(step + 1) * mm];
            t[3 * l].outer_acc(&d_a, x);
            for (du, (&d, &h)) in t[3 * l + 1].data_mut().iter_mut().zip(d_a.iter().zip(h_prev)) {
                *du += d * h;
            }
            for (db, &d) in t[3 * l + 2].data_mut().iter_mut().zip(&d_a) {
                *db += d;
            }
            if l > 0 {
                layer.w.matvec_t_acc(&d_a, &mut d_in[step * mm..(step + 1) * mm]);
            }
        }
        d_out = d_in;
    }
}
