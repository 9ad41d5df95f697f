//! Adam with standard bias correction.

use super::tensor::TensorSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: TensorSet,
    pub second_moment: TensorSet,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &TensorSet) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every tensor in the set.
pub fn adam_step(params: &mut TensorSet, grads: &TensorSet, state: &mut AdamState, lr: f64) -> Result<()> {
    if lr <= 0.0 {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    if let Some((name, offset)) = grads.find_non_finite() {
        return Err(Error::NonFinite(format!("gradient {name}[{offset}]")));
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    for idx in 0..params.len() {
        let g = grads.get(idx).data();
        let m = state.first_moment.get_mut(idx).data_mut();
        for (mk, gk) in m.iter_mut().zip(g) {
            *mk = state.beta1 * *mk + (1.0 - state.beta1) * gk;
        }
        let v = state.second_moment.get_mut(idx).data_mut();
        for (vk, gk) in v.iter_mut().zip(g) {
            *vk = state.beta2 * *vk + (1.0 - state.beta2) * gk * gk;
        }

        let m = state.first_moment.get(idx).data();
        let v = state.second_moment.get(idx).data();
        let p = params.get_mut(idx).data_mut();
        for k in 0..p.len() {
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
