//! Differential equations driven by the simulated paths, and their
//! corrected Brownian limits.
//!
//! `euler_driven` solves `dYⁿ = σ(Yⁿ₋) dXⁿ` by left-point Euler along the
//! driver's own events. For a pure-jump driver this is the càdlàg integral
//! itself, so no scheme error enters. `euler_corrected_limit` runs
//! Euler–Maruyama for
//!
//! ```text
//! dY = σ(Y) dB + Σ_{j,k,ℓ} ∂_kσ_{·j}(Y) σ_{kℓ}(Y) G_{ℓj} dt
//! ```
//!
//! with `B` Brownian of the predicted covariance and `G` the area
//! correction matching the lift the driver produces.

mod compare;
mod field;

pub use compare::{compare_laws, CoordinateGap, LawComparison, MIN_SAMPLES};
pub use field::VectorField;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homog::RoughLimitPrediction;
use crate::matrix::Matrix;
use crate::mc::{map_replicas, MacroPath, Simulator};
use crate::models::ModelConfig;
use crate::rng::{replica_rng, Purpose};
use crate::tensor_path::{Interpretation, JumpPath, SampledPath};

/// Which area correction the limit equation carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitCorrection {
    /// Limit of left-point (Itô) solutions: `G` is the Itô-level correction.
    Ito,
    /// Limit of solutions driven by the interpolated (Stratonovich) lift:
    /// `G = Γ + ½Σ`, written in Itô form.
    Stratonovich,
    /// Plain Itô equation `dY = σ(Y) dB`, the naive limit.
    None,
}

impl LimitCorrection {
    /// The matrix `G` entering the drift, in Itô form.
    pub fn area(&self, prediction: &RoughLimitPrediction) -> Result<Matrix> {
        let d = prediction.covariance.rows();
        let checked = |name: &'static str, m: &Matrix| -> Result<()> {
            if m.rows() != d || m.cols() != d {
                return Err(Error::param(name, format!("must be {d}x{d} to match the covariance")));
            }
            if m.as_slice().iter().any(|x| !x.is_finite()) {
                return Err(Error::param(name, "missing or non-finite entries"));
            }
            Ok(())
        };
        checked("covariance", &prediction.covariance)?;
        match self {
            LimitCorrection::Ito => {
                checked("ito_correction", &prediction.ito_correction)?;
                Ok(prediction.ito_correction.clone())
            }
            LimitCorrection::Stratonovich => {
                checked("gamma_strato", &prediction.gamma_strato)?;
                Ok(&prediction.gamma_strato + &prediction.covariance.scale(0.5))
            }
            LimitCorrection::None => Ok(Matrix::zeros(d, d)),
        }
    }
}

fn check_start(sigma: &VectorField, y0: &[f64], driver_dim: usize) -> Result<()> {
    sigma.validate()?;
    if y0.len() != sigma.out_dim() {
        return Err(Error::Dimension(format!("y0 has {} entries, field expects {}", y0.len(), sigma.out_dim())));
    }
    if driver_dim != sigma.driver_dim() {
        return Err(Error::Dimension(format!(
            "driver is {driver_dim}-dimensional, field expects {}",
            sigma.driver_dim()
        )));
    }
    Ok(())
}

fn euler_step(sigma: &VectorField, y: &mut [f64], dx: &[f64]) {
    let s = sigma.eval(y);
    for (i, yi) in y.iter_mut().enumerate() {
        *yi += s.row(i).iter().zip(dx).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Left-point Euler along the jumps of a step driver. The solution is
/// sampled at `0`, each jump time and the horizon.
pub fn euler_driven_jump(driver: &JumpPath, sigma: &VectorField, y0: &[f64]) -> Result<SampledPath> {
    check_start(sigma, y0, driver.dim())?;
    let mut y = y0.to_vec();
    let mut times = vec![0.0];
    let mut values = y.clone();
    for (k, &t) in driver.jump_times().iter().enumerate() {
        euler_step(sigma, &mut y, driver.increment(k));
        if t > 0.0 {
            times.push(t);
            values.extend_from_slice(&y);
        } else {
            values[..y.len()].copy_from_slice(&y);
        }
    }
    if driver.horizon() > times[times.len() - 1] {
        times.push(driver.horizon());
        values.extend_from_slice(&y);
    }
    SampledPath::from_flat(y.len(), times, values, Interpretation::GridSamples)
}

/// Left-point (Itô–Euler) scheme on the driver's sampling grid.
pub fn euler_driven_sampled(driver: &SampledPath, sigma: &VectorField, y0: &[f64]) -> Result<SampledPath> {
    check_start(sigma, y0, driver.dim())?;
    let mut y = y0.to_vec();
    let mut values = y.clone();
    let mut dx = vec![0.0; driver.dim()];
    for k in 1..driver.len() {
        for ((d, a), b) in dx.iter_mut().zip(driver.value(k)).zip(driver.value(k - 1)) {
            *d = a - b;
        }
        euler_step(sigma, &mut y, &dx);
        values.extend_from_slice(&y);
    }
    SampledPath::from_flat(y.len(), driver.times().to_vec(), values, Interpretation::GridSamples)
}

/// Dispatches on the driver type.
pub fn euler_driven(driver: &MacroPath, sigma: &VectorField, y0: &[f64]) -> Result<SampledPath> {
    match driver {
        MacroPath::Jump(p) => euler_driven_jump(p, sigma, y0),
        MacroPath::Sampled(p) => euler_driven_sampled(p, sigma, y0),
    }
}

/// Euler–Maruyama for the corrected limit on `[0, horizon]` with step `h`
/// (the last step is shortened to land on the horizon).
pub fn euler_corrected_limit<R: Rng + ?Sized>(
    sigma: &VectorField,
    prediction: &RoughLimitPrediction,
    correction: LimitCorrection,
    y0: &[f64],
    horizon: f64,
    h: f64,
    rng: &mut R,
) -> Result<SampledPath> {
    let d = prediction.covariance.rows();
    check_start(sigma, y0, d)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("step", format!("must be positive and finite, got {h}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon", format!("must be positive and finite, got {horizon}")));
    }
    let g = correction.area(prediction)?;
    let root = prediction.covariance.psd_sqrt(1e-10)?;
    let steps = ((horizon / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut y = y0.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity((steps + 1) * y.len());
    times.push(0.0);
    values.extend_from_slice(&y);
    let mut z = vec![0.0; d];
    for k in 0..steps {
        let t0 = k as f64 * h;
        let t1 = if k + 1 == steps { horizon } else { (k + 1) as f64 * h };
        let dt = t1 - t0;
        z.iter_mut().for_each(|v| *v = rng.sample::<f64, _>(StandardNormal));
        let db: Vec<f64> = root.mul_vec(&z).into_iter().map(|v| v * dt.sqrt()).collect();
        let drift = sigma.correction_drift(&y, &g);
        euler_step(sigma, &mut y, &db);
        y.iter_mut().zip(&drift).for_each(|(yi, b)| *yi += b * dt);
        times.push(t1);
        values.extend_from_slice(&y);
    }
    SampledPath::from_flat(y.len(), times, values, Interpretation::GridSamples)
}

/// `Yⁿ_T` for `replicas` simulated drivers of `config`.
pub fn driven_endpoints(
    config: &ModelConfig,
    sigma: &VectorField,
    y0: &[f64],
    replicas: usize,
    workers: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    let sim = Simulator::new(config)?;
    check_start(sigma, y0, sim.dim())?;
    map_replicas(replicas, workers, |r| {
        let y = euler_driven(&sim.replica(r)?, sigma, y0)?;
        Ok(y.end().to_vec())
    })
}

/// `Y_T` of the limit equation for `replicas` independent Brownian paths,
/// replica `r` drawing from the limit stream of `(seed, r)`.
#[allow(clippy::too_many_arguments)]
pub fn limit_endpoints(
    sigma: &VectorField,
    prediction: &RoughLimitPrediction,
    correction: LimitCorrection,
    y0: &[f64],
    horizon: f64,
    h: f64,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    map_replicas(replicas, workers, |r| {
        let mut rng = replica_rng(seed, Purpose::Limit, r);
        let y = euler_corrected_limit(sigma, prediction, correction, y0, horizon, h, &mut rng)?;
        Ok(y.end().to_vec())
    })
}
