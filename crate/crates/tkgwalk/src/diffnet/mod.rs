//! Minimal differentiable core: embedding tables as plain tensors, a 4-gate
//! LSTM cell, a two-layer ReLU perceptron, softmax/sigmoid/tanh, a reverse-mode
//! tape, Adam, and a finite-difference gradient oracle.
//!
//! Forward math exists twice on purpose: the tape ops (for training) and the
//! plain functions below (for inference and as an independent route in
//! gradient checks). A property test pins the two routes to each other.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::finite_diff_check;
pub use tape::{Tape, Var};
pub use tensor::{Tensor, TensorSet};

pub(crate) use tape::{dot, log_softmax, sigmoid};

use crate::error::{Error, Result};

/// Plain LSTM forward step. Weight layout: `wx` is (4h x in), `wh` is
/// (4h x h), `bias` is (4h); gate row order `[input, forget, candidate, output]`.
pub fn recurrent_step(
    wx: &Tensor,
    wh: &Tensor,
    bias: &Tensor,
    prev_hidden: &[f64],
    prev_cell: &[f64],
    input: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = prev_hidden.len();
    if prev_cell.len() != h || wx.rows() != 4 * h || wh.rows() != 4 * h || wh.cols() != h {
        return Err(Error::ShapeMismatch(format!(
            "lstm: hidden {h}, cell {}, wx {:?}, wh {:?}",
            prev_cell.len(),
            wx.shape(),
            wh.shape()
        )));
    }
    if wx.cols() != input.len() || bias.len() != 4 * h {
        return Err(Error::ShapeMismatch(format!(
            "lstm: input {} vs wx cols {}, bias {}",
            input.len(),
            wx.cols(),
            bias.len()
        )));
    }

    let mut pre = vec![0.0; 4 * h];
    for (r, slot) in pre.iter_mut().enumerate() {
        *slot = dot(wx.row(r), input) + dot(wh.row(r), prev_hidden) + bias.data()[r];
    }
    let mut hidden = vec![0.0; h];
    let mut cell = vec![0.0; h];
    for k in 0..h {
        let i = sigmoid(pre[k]);
        let f = sigmoid(pre[h + k]);
        let g = pre[2 * h + k].tanh();
        let o = sigmoid(pre[3 * h + k]);
        cell[k] = f * prev_cell[k] + i * g;
        hidden[k] = o * cell[k].tanh();
    }
    if hidden.iter().chain(&cell).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lstm output".into()));
    }
    Ok((hidden, cell))
}

/// Plain two-layer perceptron: `w2 . relu(w1 . input)`.
pub fn mlp2(input: &[f64], w1: &Tensor, w2: &Tensor) -> Result<Vec<f64>> {
    if w1.cols() != input.len() || w2.cols() != w1.rows() {
        return Err(Error::ShapeMismatch(format!(
            "mlp2: input {}, w1 {:?}, w2 {:?}",
            input.len(),
            w1.shape(),
            w2.shape()
        )));
    }
    let mut hidden = vec![0.0; w1.rows()];
    for (r, slot) in hidden.iter_mut().enumerate() {
        *slot = dot(w1.row(r), input).max(0.0);
    }
    let mut out = vec![0.0; w2.rows()];
    for (r, slot) in out.iter_mut().enumerate() {
        *slot = dot(w2.row(r), &hidden);
    }
    Ok(out)
}

/// Max-shifted softmax; always a valid distribution for finite input.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    log_softmax(scores).iter().map(|lp| lp.exp()).collect()
}
