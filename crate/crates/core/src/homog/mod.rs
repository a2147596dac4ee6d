//! Predicted limits `(⟨B,B⟩₁, Γ, Itô correction)` for each model class.
//!
//! The level-2 mean of the rescaled lift at `t = 1` converges to
//! `½⟨B,B⟩₁ + Γ` for Stratonovich-type lifts. `ito_correction` is the
//! additive term in the limit of the Itô-type lift the model naturally
//! carries: for the walk this is the Itô lift of its jumps, for the
//! continuous models it is the total drift beyond `∫ B ⊗ dB`.

mod spectral;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use spectral::{torus_poisson_solve, torus_poisson_solve_adaptive, FrequencyBox, TorusField, RESIDUAL_TARGET};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{ConductanceLaw, OuParams, PeriodicCoefficients};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Spectral,
    EmpiricalFormula,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughLimitPrediction {
    pub covariance: Matrix,
    pub gamma_strato: Matrix,
    pub ito_correction: Matrix,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    /// Predicted mean of `𝕏̄ − 𝕏` at `t = 1` for jump models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation_gap: Option<Matrix>,
}

/// Corrector matrix `C = (I + A)^{-1} = ½(I − A)`, so that `Φ(x) = Cx`
/// solves `−LΦ = x`.
pub fn ou_corrector(params: &OuParams) -> Matrix {
    (&Matrix::identity(2) - &params.antisymmetric()).scale(0.5)
}

/// OU prediction from the linear corrector: `⟨B,B⟩₁ = 2CCᵀ = I` and
/// `Γ = E[Φ ⊗ L_A Φ] = C A Cᵀ` under the stationary law `N(0, I)`, where
/// `L_A = −Ax·∇` is the antisymmetric part of the generator.
pub fn ou_predict() -> RoughLimitPrediction {
    let params = OuParams::default();
    let c = ou_corrector(&params);
    let a = params.antisymmetric();
    let covariance = c.matmul(&c.transpose()).scale(2.0);
    let gamma = c.matmul(&a).matmul(&c.transpose());
    let ito_correction = &covariance.scale(0.5) + &gamma;
    RoughLimitPrediction {
        covariance,
        gamma_strato: gamma,
        ito_correction,
        provenance: Provenance::ClosedForm,
        residual: None,
        interpolation_gap: None,
    }
}

/// Packages the conductance-model formulas around an (empirical)
/// covariance: `Γ = 0` for the interpolated lift, and the Itô lift's mean
/// tends to `½⟨B,B⟩₁ − E[η] I`.
pub fn conductance_predict(law: &ConductanceLaw, covariance: &Matrix) -> Result<RoughLimitPrediction> {
    law.validate()?;
    if !covariance.is_square() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let d = covariance.rows();
    let gap = Matrix::identity(d).scale(law.mean());
    let ito_correction = &covariance.scale(0.5) - &gap;
    let provenance = if conductance_closed_form_covariance(law, d).is_some_and(|c| &c == covariance) {
        Provenance::ClosedForm
    } else {
        Provenance::EmpiricalFormula
    };
    Ok(RoughLimitPrediction {
        covariance: covariance.clone(),
        gamma_strato: Matrix::zeros(d, d),
        ito_correction,
        provenance,
        residual: None,
        interpolation_gap: Some(gap),
    })
}

/// Effective covariance `2·κ_eff·I` where it is known in closed form: point
/// masses, every law in `d = 1` (harmonic mean) and the symmetric two-point
/// law in `d = 2` (geometric mean, by Keller-Dykhne duality).
pub fn conductance_closed_form_covariance(law: &ConductanceLaw, dim: usize) -> Option<Matrix> {
    let eff = match (*law, dim) {
        _ if law.is_degenerate() => law.mean(),
        (ConductanceLaw::Uniform { a, b }, 1) => (b - a) / (b / a).ln(),
        (ConductanceLaw::TwoPoint { a, b, q }, 1) => 1.0 / (q / a + (1.0 - q) / b),
        (ConductanceLaw::TwoPoint { a, b, q: 0.5 }, 2) => (a * b).sqrt(),
        _ => return None,
    };
    Some(Matrix::identity(dim).scale(2.0 * eff))
}

type ModeList = Vec<(Vec<i32>, Vec<Complex64>)>;

fn split_modes(coeffs: &PeriodicCoefficients) -> (ModeList, ModeList) {
    let d = coeffs.dim();
    let mut sym = Vec::new();
    let mut anti = Vec::new();
    for m in coeffs.modes() {
        let s = (0..d * d).map(|ij| 0.5 * (m.coeff[ij] + m.coeff[(ij % d) * d + ij / d])).collect();
        let a = (0..d * d).map(|ij| 0.5 * (m.coeff[ij] - m.coeff[(ij % d) * d + ij / d])).collect();
        sym.push((m.k.clone(), s));
        anti.push((m.k.clone(), a));
    }
    (sym, anti)
}

/// Prediction for a periodic diffusion from its corrector, with every
/// integral evaluated exactly on the truncated series:
/// `cov_ij = 2∫(∇Φ^i + e_i)·a^S(∇Φ^j + e_j)`,
/// `Γ_ij = −∫∇Φ^i·a^A∇Φ^j` and `ito = ½cov − ∫a^S + Γ`.
pub fn periodic_predict(coeffs: &PeriodicCoefficients, phi: &TorusField) -> Result<RoughLimitPrediction> {
    let d = coeffs.dim();
    if phi.dim() != d || phi.components.len() != d {
        return Err(Error::Dimension(format!(
            "corrector for dimension {} used with a {d}-dimensional field",
            phi.dim()
        )));
    }
    if !(phi.max_residual() <= RESIDUAL_TARGET) {
        return Err(Error::NotConverged {
            residual: phi.max_residual(),
            target: RESIDUAL_TARGET,
            cutoff: phi.cutoff(),
        });
    }
    let fb = &phi.frequencies;
    let (sym, anti) = split_modes(coeffs);
    let shifted: Vec<_> = (0..d).map(|c| phi.shifted_gradient(c)).collect();
    let grads: Vec<_> = (0..d).map(|c| phi.gradient(c)).collect();
    let mut covariance = Matrix::zeros(d, d);
    let mut gamma = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            covariance[(i, j)] = 2.0 * spectral::bilinear(fb, &shifted[i], &shifted[j], &sym).re;
            gamma[(i, j)] = -spectral::bilinear(fb, &grads[i], &grads[j], &anti).re;
        }
    }
    let covariance = covariance.symmetric_part();
    let gamma = gamma.antisymmetric_part();
    let mean_sym = coeffs.mean().symmetric_part();
    let ito_correction = &(&covariance.scale(0.5) - &mean_sym) + &gamma;
    Ok(RoughLimitPrediction {
        covariance,
        gamma_strato: gamma,
        ito_correction,
        provenance: Provenance::Spectral,
        residual: Some(phi.max_residual()),
        interpolation_gap: None,
    })
}

/// Harmonic-mean (Reiss) and arithmetic-mean (Voigt) bounds on the
/// effective symmetric diffusivity `½cov`: `(∫(a^S)^{-1})^{-1}` and `∫a^S`,
/// by trapezoidal quadrature on `points^d` nodes. The bracket holds for
/// symmetric fields.
pub fn voigt_reiss_bounds(coeffs: &PeriodicCoefficients, points: usize) -> Result<(Matrix, Matrix)> {
    let d = coeffs.dim();
    let total = points.pow(d as u32);
    let mut inv_sum = Matrix::zeros(d, d);
    let mut x = vec![0.0; d];
    for idx in 0..total {
        let mut r = idx;
        for xi in x.iter_mut() {
            *xi = (r % points) as f64 / points as f64;
            r /= points;
        }
        let s = coeffs.a(&x).symmetric_part();
        let inv = match d {
            1 => Matrix::from_fn(1, 1, |_, _| 1.0 / s[(0, 0)]),
            2 => s.inverse_2x2()?,
            _ => {
                let (vals, vecs) = s.symmetric_eigen();
                Matrix::from_fn(d, d, |i, j| (0..d).map(|k| vecs[(i, k)] * vecs[(j, k)] / vals[k]).sum())
            }
        };
        inv_sum += &inv;
    }
    let mean_inv = inv_sum.scale(1.0 / total as f64);
    let lower = match d {
        1 => Matrix::from_fn(1, 1, |_, _| 1.0 / mean_inv[(0, 0)]),
        2 => mean_inv.inverse_2x2()?,
        _ => {
            let (vals, vecs) = mean_inv.symmetric_eigen();
            Matrix::from_fn(d, d, |i, j| (0..d).map(|k| vecs[(i, k)] * vecs[(j, k)] / vals[k]).sum())
        }
    };
    Ok((lower, coeffs.mean().symmetric_part()))
}

/// True when `lower ≤ m ≤ upper` in quadratic-form order, up to `tol`.
pub fn bracketed(lower: &Matrix, m: &Matrix, upper: &Matrix, tol: f64) -> bool {
    let low = (m - lower).symmetric_part().symmetric_eigenvalues();
    let up = (upper - m).symmetric_part().symmetric_eigenvalues();
    low[0] >= -tol && up[0] >= -tol
}
