//! Two-dimensional non-reversible Ornstein-Uhlenbeck process
//! `dX = −(I + A) X dt + √2 dW` with `A` the rotation generator.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor_path::{Interpretation, SampledPath};

/// Parameters of the OU model. The model is fixed; the struct exists so
/// configurations name it explicitly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {}

impl OuParams {
    pub const DIM: usize = 2;

    /// `A = [[0, −1], [1, 0]]`.
    pub fn antisymmetric(&self) -> Matrix {
        Matrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => -1.0,
            (1, 0) => 1.0,
            _ => 0.0,
        })
    }

    /// `I + A`.
    pub fn drift_matrix(&self) -> Matrix {
        &Matrix::identity(2) + &self.antisymmetric()
    }

    /// Exact one-step transition: `X_{t+h} = M X_t + ξ`, `ξ ~ N(0, v I)`,
    /// with `M = e^{−h} R(−h)` and `v = 1 − e^{−2h}`.
    pub fn transition(&self, h: f64) -> (Matrix, f64) {
        let (s, c) = h.sin_cos();
        let e = (-h).exp();
        let m = Matrix::from_fn(2, 2, |i, j| {
            e * match (i, j) {
                (0, 0) | (1, 1) => c,
                (0, 1) => s,
                _ => -s,
            }
        });
        (m, -(-2.0 * h).exp_m1())
    }
}

/// Grid size `nT / h`, required to be an integer up to rounding.
pub(crate) fn step_count(total: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::param("step", format!("must be positive and finite, got {h}")));
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::param("horizon", format!("must be positive and finite, got {total}")));
    }
    let steps = (total / h).round();
    if steps < 1.0 || (steps * h - total).abs() > 1e-9 * total {
        return Err(Error::param("step", format!("{h} does not divide the horizon {total}")));
    }
    Ok(steps as usize)
}

/// Stationary OU path on the microscopic window `[0, nT]` with exact
/// Gaussian transitions on the grid of step `h`.
pub fn simulate_ou<R: Rng + ?Sized>(
    params: &OuParams,
    horizon: f64,
    scale_n: f64,
    h: f64,
    rng: &mut R,
) -> Result<SampledPath> {
    if !(scale_n > 0.0) {
        return Err(Error::param("scale_n", format!("must be positive, got {scale_n}")));
    }
    let total = horizon * scale_n;
    let steps = step_count(total, h)?;
    let (m, var) = params.transition(h);
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let sd = var.sqrt();
    let mut values = Vec::with_capacity(2 * (steps + 1));
    let mut x0: f64 = rng.sample(StandardNormal);
    let mut x1: f64 = rng.sample(StandardNormal);
    values.extend([x0, x1]);
    for _ in 0..steps {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let y0 = m00 * x0 + m01 * x1 + sd * z0;
        let y1 = m10 * x0 + m11 * x1 + sd * z1;
        x0 = y0;
        x1 = y1;
        values.extend([x0, x1]);
    }
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    times[steps] = total;
    SampledPath::from_flat(2, times, values, Interpretation::PiecewiseLinear)
}
