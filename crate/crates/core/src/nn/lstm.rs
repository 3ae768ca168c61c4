use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::Tensor;
use crate::{Error, Result};

/// Gate order used for every per-gate array: forget, input, output, candidate.
pub const GATE_NAMES: [&str; 4] = ["f", "i", "o", "c"];

const F: usize = 0;
const I: usize = 1;
const O: usize = 2;
const C: usize = 3;

/// LSTM layer following
///
/// ```text
/// f_t = sigmoid(W_f x_t + U_f h_{t-1} + b_f)
/// i_t = sigmoid(W_i x_t + U_i h_{t-1} + b_i)
/// o_t = sigmoid(W_o x_t + U_o h_{t-1} + b_o)
/// c_t = f_t * c_{t-1} + i_t * (W_c x_t + U_c h_{t-1} + b_c)
/// h_t = o_t * tanh(c_t)
/// ```
///
/// The candidate term is linear unless `candidate_tanh` is set, in which case
/// it is wrapped in `tanh` as in the textbook cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    /// Input weights per gate, each `m x n`.
    pub w: [Tensor; 4],
    /// Recurrent weights per gate, each `m x m`.
    pub u: [Tensor; 4],
    /// Biases per gate, each `m x 1`.
    pub b: [Tensor; 4],
    #[serde(default)]
    pub candidate_tanh: bool,
}

/// Per-step gate values, all `T x m` row-major.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    pub steps: usize,
    pub h0: Vec<f64>,
    pub c0: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    /// Candidate values after the optional `tanh`.
    pub candidate: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmTrace {
    fn at(v: &[f64], m: usize, t: usize) -> &[f64] {
        &v[t * m..(t + 1) * m]
    }

    pub fn hidden_at(&self, t: Option<usize>) -> &[f64] {
        match t {
            None => &self.h0,
            Some(t) => Self::at(&self.hidden, self.h0.len(), t),
        }
    }

    pub fn cell_at(&self, t: Option<usize>) -> &[f64] {
        match t {
            None => &self.c0,
            Some(t) => Self::at(&self.cell, self.c0.len(), t),
        }
    }

    /// Last hidden state, or `h0` for an empty sequence.
    pub fn last_hidden(&self) -> &[f64] {
        self.hidden_at(self.steps.checked_sub(1))
    }

    /// Last cell state, or `c0` for an empty sequence.
    pub fn final_cell(&self) -> &[f64] {
        self.cell_at(self.steps.checked_sub(1))
    }
}

impl LstmLayer {
    pub fn new(w: [Tensor; 4], u: [Tensor; 4], b: [Tensor; 4], candidate_tanh: bool) -> Result<Self> {
        let (m, n) = w[0].shape();
        if m == 0 || n == 0 {
            return Err(Error::shape("LSTM layer needs m >= 1 and n >= 1"));
        }
        for g in 0..4 {
            if w[g].shape() != (m, n) || u[g].shape() != (m, m) || b[g].shape() != (m, 1) {
                return Err(Error::shape(format!(
                    "LSTM gate {} has W {:?}, U {:?}, b {:?}; expected ({m}, {n}), ({m}, {m}), ({m}, 1)",
                    GATE_NAMES[g],
                    w[g].shape(),
                    u[g].shape(),
                    b[g].shape()
                )));
            }
        }
        Ok(Self {
            w,
            u,
            b,
            candidate_tanh,
        })
    }

    pub fn zeros(input_width: usize, width: usize) -> Self {
        let t = |r, c| std::array::from_fn(|_| Tensor::zeros(r, c));
        Self {
            w: t(width, input_width),
            u: t(width, width),
            b: t(width, 1),
            candidate_tanh: false,
        }
    }

    pub fn input_width(&self) -> usize {
        self.w[0].cols()
    }

    pub fn width(&self) -> usize {
        self.w[0].rows()
    }

    /// Runs the cell over `inputs` (`T x n`, row-major) from `h0`, `c0`
    /// (zeros when `None`).
    pub fn forward(&self, inputs: &[f64], h0: Option<&[f64]>, c0: Option<&[f64]>) -> Result<LstmTrace> {
        let (m, n) = (self.width(), self.input_width());
        if inputs.len() % n != 0 {
            return Err(Error::shape(format!(
                "LSTM input of length {} is not a multiple of {n}",
                inputs.len()
            )));
        }
        let init = |v: Option<&[f64]>, what: &str| match v {
            Some(v) if v.len() != m => Err(Error::shape(format!(
                "{what} has {} entries, layer has {m}",
                v.len()
            ))),
            Some(v) => Ok(v.to_vec()),
            None => Ok(vec![0.0; m]),
        };
        let h0 = init(h0, "h0")?;
        let c0 = init(c0, "c0")?;
        let steps = inputs.len() / n;
        let mut tr = LstmTrace {
            steps,
            forget: vec![0.0; steps * m],
            input: vec![0.0; steps * m],
            output: vec![0.0; steps * m],
            candidate: vec![0.0; steps * m],
            cell: vec![0.0; steps * m],
            tanh_cell: vec![0.0; steps * m],
            hidden: vec![0.0; steps * m],
            h0,
            c0,
        };
        let mut pre = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        for t in 0..steps {
            let x = &inputs[t * n..(t + 1) * n];
            let h_prev = tr.hidden_at(t.checked_sub(1)).to_vec();
            let c_prev = tr.cell_at(t.checked_sub(1)).to_vec();
            for g in 0..4 {
                pre[g].copy_from_slice(self.b[g].data());
                self.w[g].matvec_acc(x, &mut pre[g]);
                self.u[g].matvec_acc(&h_prev, &mut pre[g]);
            }
            let r = t * m..(t + 1) * m;
            for k in 0..m {
                let f = sigmoid(pre[F][k]);
                let i = sigmoid(pre[I][k]);
                let o = sigmoid(pre[O][k]);
                let g = if self.candidate_tanh {
                    pre[C][k].tanh()
                } else {
                    pre[C][k]
                };
                let c = f * c_prev[k] + i * g;
                let tc = c.tanh();
                let idx = r.start + k;
                tr.forget[idx] = f;
                tr.input[idx] = i;
                tr.output[idx] = o;
                tr.candidate[idx] = g;
                tr.cell[idx] = c;
                tr.tanh_cell[idx] = tc;
                tr.hidden[idx] = o * tc;
            }
        }
        Ok(tr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_half_gates() {
        let layer = LstmLayer::zeros(3, 4);
        let x: Vec<f64> = (0..15).map(|i| i as f64 * 0.3 - 2.0).collect();
        let tr = layer.forward(&x, None, None).unwrap();
        assert_eq!(tr.steps, 5);
        assert!(tr.forget.iter().chain(&tr.input).chain(&tr.output).all(|&g| g == 0.5));
        assert!(tr.candidate.iter().chain(&tr.cell).chain(&tr.hidden).all(|&v| v == 0.0));
    }

    #[test]
    fn cell_decays_by_half() {
        let layer = LstmLayer::zeros(2, 3);
        let c0 = [1.0, -2.0, 0.25];
        let tr = layer.forward(&[0.0; 12], None, Some(&c0)).unwrap();
        for t in 0..6 {
            let decay = 0.5f64.powi(t as i32 + 1);
            for k in 0..3 {
                let c = decay * c0[k];
                assert!((tr.cell_at(Some(t))[k] - c).abs() < 1e-12);
                assert!((tr.hidden_at(Some(t))[k] - 0.5 * c.tanh()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_sequence_keeps_state() {
        let layer = LstmLayer::zeros(2, 2);
        let tr = layer.forward(&[], Some(&[0.1, 0.2]), Some(&[3.0, 4.0])).unwrap();
        assert_eq!(tr.steps, 0);
        assert!(tr.hidden.is_empty());
        assert_eq!(tr.final_cell(), &[3.0, 4.0]);
        assert_eq!(tr.last_hidden(), &[0.1, 0.2]);
    }

    #[test]
    fn dimension_checks() {
        let layer = LstmLayer::zeros(2, 2);
        assert!(layer.forward(&[1.0, 2.0, 3.0], None, None).is_err());
        assert!(layer.forward(&[1.0, 2.0], Some(&[0.0]), None).is_err());
        let mut bad = LstmLayer::zeros(2, 2);
        bad.u[1] = Tensor::zeros(3, 3);
        assert!(LstmLayer::new(bad.w, bad.u, bad.b, false).is_err());
    }
}
