//! Central finite-difference oracle for gradient verification.

use super::tensor::TensorSet;

/// Compares `analytic` against central differences of `loss_fn` on every
/// coordinate of `params` and returns the worst relative error.
///
/// Relative error uses `|a - fd| / max(|a|, |fd|, 1e-6)` so coordinates where
/// both sides are essentially zero do not dominate.
pub fn finite_diff_check(
    loss_fn: &mut dyn FnMut(&TensorSet) -> f64,
    params: &mut TensorSet,
    analytic: &TensorSet,
    epsilon: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for idx in 0..params.len() {
        for k in 0..params.get(idx).len() {
            let original = params.get(idx).data()[k];

            params.get_mut(idx).data_mut()[k] = original + epsilon;
            let plus = loss_fn(params);
            params.get_mut(idx).data_mut()[k] = original - epsilon;
            let minus = loss_fn(params);
            params.get_mut(idx).data_mut()[k] = original;

            let fd = (plus - minus) / (2.0 * epsilon);
            let a = analytic.get(idx).data()[k];
            let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}
