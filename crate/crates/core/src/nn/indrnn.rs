use serde::{Deserialize, Serialize};

use super::{Activation, Tensor};
use crate::{Error, Result};

/// Independently recurrent layer: `h_t = act(W x_t + u * h_{t-1} + b)` where
/// `u * h` is elementwise, so neuron `n` only ever sees its own past state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndRnnLayer {
    /// `N x M` input weights.
    pub w: Tensor,
    /// Per-neuron recurrent weight, `N x 1`.
    pub u: Tensor,
    /// `N x 1`.
    pub b: Tensor,
    pub activation: Activation,
    /// Bound on `|u_n|`, re-applied after every parameter update.
    pub u_max: f64,
}

/// Everything the backward pass needs from one IndRNN forward pass.
#[derive(Clone, Debug)]
pub struct IndRnnTrace {
    pub steps: usize,
    pub h0: Vec<f64>,
    /// `T x N` preactivations.
    pub pre: Vec<f64>,
    /// `T x N` hidden states.
    pub hidden: Vec<f64>,
}

impl IndRnnTrace {
    /// Hidden state at step `t`; `t = None` gives `h0`.
    pub fn state(&self, t: Option<usize>) -> &[f64] {
        let n = self.h0.len();
        match t {
            None => &self.h0,
            Some(t) => &self.hidden[t * n..(t + 1) * n],
        }
    }
}

impl IndRnnLayer {
    pub fn new(w: Tensor, u: Tensor, b: Tensor, activation: Activation, u_max: f64) -> Result<Self> {
        let n = w.rows();
        if n == 0 || w.cols() == 0 {
            return Err(Error::shape("IndRNN layer needs N >= 1 and M >= 1"));
        }
        if u.shape() != (n, 1) || b.shape() != (n, 1) {
            return Err(Error::shape(format!(
                "IndRNN u {:?} and b {:?} must be {n}x1",
                u.shape(),
                b.shape()
            )));
        }
        if !(u_max > 0.0) {
            return Err(Error::config("u_max must be positive"));
        }
        let mut layer = Self {
            w,
            u,
            b,
            activation,
            u_max,
        };
        layer.clamp_recurrent();
        Ok(layer)
    }

    pub fn input_width(&self) -> usize {
        self.w.cols()
    }

    pub fn width(&self) -> usize {
        self.w.rows()
    }

    pub fn clamp_recurrent(&mut self) {
        let bound = self.u_max;
        for u in self.u.data_mut() {
            *u = u.clamp(-bound, bound);
        }
    }

    /// Runs the recurrence over `inputs` (`T x M`, row-major) from `h0`
    /// (zeros when `None`).
    pub fn forward(&self, inputs: &[f64], h0: Option<&[f64]>) -> Result<IndRnnTrace> {
        let (n, m) = (self.width(), self.input_width());
        if inputs.len() % m != 0 {
            return Err(Error::shape(format!(
                "IndRNN input of length {} is not a multiple of {m}",
                inputs.len()
            )));
        }
        let h0 = match h0 {
            Some(h) if h.len() != n => {
                return Err(Error::shape(format!("h0 has {} entries, layer has {n}", h.len())))
            }
            Some(h) => h.to_vec(),
            None => vec![0.0; n],
        };
        let steps = inputs.len() / m;
        let mut pre = vec![0.0; steps * n];
        let mut hidden = vec![0.0; steps * n];
        let (u, b) = (self.u.data(), self.b.data());
        for t in 0..steps {
            let x = &inputs[t * m..(t + 1) * m];
            let (done, rest) = hidden.split_at_mut(t * n);
            let prev = if t == 0 { &h0[..] } else { &done[(t - 1) * n..] };
            let a = &mut pre[t * n..(t + 1) * n];
            a.copy_from_slice(b);
            self.w.matvec_acc(x, a);
            let h = &mut rest[..n];
            for k in 0..n {
                a[k] += u[k] * prev[k];
                h[k] = self.activation.apply(a[k]);
            }
        }
        Ok(IndRnnTrace {
            steps,
            h0,
            pre,
            hidden,
        })
    }

    /// Per-neuron `d h_{n,end} / d h_{n,start}`: `u_n^(end-start)` times the
    /// product of `act'(a_{n,k})` for `k` in `(start, end]`.
    pub fn gradient_factor(&self, trace: &IndRnnTrace, start: usize, end: usize) -> Result<Vec<f64>> {
        if start >= end || end >= trace.steps {
            return Err(Error::shape(format!(
                "span ({start}, {end}] invalid for {} steps",
                trace.steps
            )));
        }
        let n = self.width();
        Ok((0..n)
            .map(|k| {
                let u = self.u.data()[k];
                ((start + 1)..=end)
                    .map(|t| u * self.activation.derivative(trace.pre[t * n + k]))
                    .product()
            })
            .collect())
    }
}
