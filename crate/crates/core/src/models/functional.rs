//! Diffusively rescaled additive functionals `Z^n_t = n^{-1/2} ∫_0^{nt} F(X_r) dr`.

use crate::error::{Error, Result};
use crate::tensor_path::{Interpretation, SampledPath};

/// Trapezoidal `Z^n` on the macroscopic grid `t_k / n`, piecewise linear.
/// `observable(x, out)` writes `F(x)` into `out` (length `out_dim`).
pub fn additive_functional(
    path: &SampledPath,
    scale_n: f64,
    horizon: f64,
    out_dim: usize,
    observable: impl Fn(&[f64], &mut [f64]),
) -> Result<SampledPath> {
    if !(scale_n > 0.0) {
        return Err(Error::param("scale_n", format!("must be positive, got {scale_n}")));
    }
    let total = scale_n * horizon;
    if (path.horizon() - total).abs() > 1e-9 * total.max(1.0) {
        return Err(Error::Mismatch(format!(
            "path covers [0, {}] but scale {scale_n} and horizon {horizon} need [0, {total}]",
            path.horizon()
        )));
    }
    let norm = scale_n.sqrt().recip();
    let n = path.len();
    let mut values = Vec::with_capacity(n * out_dim);
    let mut acc = vec![0.0; out_dim];
    let mut f_prev = vec![0.0; out_dim];
    let mut f_next = vec![0.0; out_dim];
    observable(path.value(0), &mut f_prev);
    values.extend(std::iter::repeat_n(0.0, out_dim));
    for k in 1..n {
        observable(path.value(k), &mut f_next);
        let dt = path.times()[k] - path.times()[k - 1];
        for i in 0..out_dim {
            acc[i] += 0.5 * dt * (f_prev[i] + f_next[i]);
        }
        values.extend(acc.iter().map(|a| a * norm));
        std::mem::swap(&mut f_prev, &mut f_next);
    }
    let mut times: Vec<f64> = path.times().iter().map(|t| t / scale_n).collect();
    if let Some(last) = times.last_mut() {
        *last = horizon;
    }
    SampledPath::from_flat(out_dim, times, values, Interpretation::PiecewiseLinear)
}

/// `F(x) = x`.
pub fn identity_observable(x: &[f64], out: &mut [f64]) {
    out.copy_from_slice(x);
}
