//! Diffusions with smooth `Z^d`-periodic coefficients,
//! `dX = b(X) dt + √2 σ(X) dW` with `b_j = Σ_i ∂_i a_ij` and `σ = √(a^S)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::ou::step_count;
use crate::tensor_path::{Interpretation, SampledPath};

/// One Fourier coefficient `â(k)` of the matrix field, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierMode {
    pub k: Vec<i32>,
    pub coeff: Vec<Complex64>,
}

impl FourierMode {
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let d = self.k.len();
        self.coeff[i * d + j]
    }
}

/// Mode of a scalar field in `d = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarModeSpec {
    pub k: i32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Mode of a matrix field; `im` defaults to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixModeSpec {
    pub k: Vec<i32>,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

/// Serializable description of a coefficient field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PeriodicSpec {
    /// `a ≡ I`.
    Identity { dim: usize },
    /// `a = I + κ·sin(2πx₁)sin(2πx₂)·[[0,−1],[1,0]]` in `d = 2`.
    AntisymPerturbation { kappa: f64 },
    /// Scalar `a(x) = Σ_k â_k e^{2πikx}` in `d = 1`.
    Scalar1d { modes: Vec<ScalarModeSpec> },
    /// General truncated Fourier series.
    Modes { dim: usize, modes: Vec<MatrixModeSpec> },
}

/// Truncated Fourier series of a real `Z^d`-periodic matrix field with
/// sampled ellipticity bounds of its symmetric part.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicCoefficients {
    dim: usize,
    modes: Vec<FourierMode>,
    lambda_min: f64,
    lambda_max: f64,
}

impl PeriodicCoefficients {
    /// Builds the field from modes, merging repeated frequencies, and checks
    /// Hermitian symmetry and ellipticity.
    pub fn from_modes(dim: usize, modes: Vec<FourierMode>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be positive"));
        }
        let mut merged: Vec<FourierMode> = Vec::new();
        for m in modes {
            if m.k.len() != dim || m.coeff.len() != dim * dim {
                return Err(Error::Dimension(format!("mode {:?} does not fit dimension {dim}", m.k)));
            }
            if m.coeff.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::param("modes", format!("non-finite coefficient at {:?}", m.k)));
            }
            match merged.iter_mut().find(|e| e.k == m.k) {
                Some(e) => e.coeff.iter_mut().zip(&m.coeff).for_each(|(a, b)| *a += b),
                None => merged.push(m),
            }
        }
        merged.retain(|m| m.coeff.iter().any(|c| c.norm() > 0.0));
        merged.sort_by(|a, b| a.k.cmp(&b.k));
        for m in &merged {
            let neg: Vec<i32> = m.k.iter().map(|x| -x).collect();
            let partner = merged.iter().find(|e| e.k == neg);
            let ok = match partner {
                Some(p) => m.coeff.iter().zip(&p.coeff).all(|(a, b)| (a - b.conj()).norm() <= 1e-12),
                None => false,
            };
            if !ok {
                return Err(Error::param(
                    "modes",
                    format!("coefficients at {:?} and {neg:?} are not complex conjugates", m.k),
                ));
            }
        }
        let mut out = PeriodicCoefficients { dim, modes: merged, lambda_min: 0.0, lambda_max: 0.0 };
        let (lo, hi) = out.sample_ellipticity();
        if !(lo > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
        }
        out.lambda_min = lo;
        out.lambda_max = hi;
        Ok(out)
    }

    pub fn from_spec(spec: &PeriodicSpec) -> Result<Self> {
        match spec {
            PeriodicSpec::Identity { dim } => Self::identity(*dim),
            PeriodicSpec::AntisymPerturbation { kappa } => Self::antisym_perturbation(*kappa),
            PeriodicSpec::Scalar1d { modes } => {
                Self::scalar_1d(&modes.iter().map(|m| (m.k, Complex64::new(m.re, m.im))).collect::<Vec<_>>())
            }
            PeriodicSpec::Modes { dim, modes } => {
                let d = *dim;
                let mut out = Vec::with_capacity(modes.len());
                for m in modes {
                    let flat = |rows: &Vec<Vec<f64>>| -> Result<Vec<f64>> {
                        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                            return Err(Error::Dimension(format!("mode {:?} is not {d}x{d}", m.k)));
                        }
                        Ok(rows.iter().flatten().copied().collect())
                    };
                    let re = flat(&m.re)?;
                    let im = match &m.im {
                        Some(rows) => flat(rows)?,
                        None => vec![0.0; d * d],
                    };
                    let coeff = re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect();
                    out.push(FourierMode { k: m.k.clone(), coeff });
                }
                Self::from_modes(d, out)
            }
        }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let coeff = Matrix::identity(dim).as_slice().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_modes(dim, vec![FourierMode { k: vec![0; dim], coeff }])
    }

    /// `a = I + κ·s(x)·J` with `s = sin2πx₁·sin2πx₂` and `J = [[0,−1],[1,0]]`.
    pub fn antisym_perturbation(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::param("kappa", "must be finite"));
        }
        let j = |c: f64| {
            vec![Complex64::new(0.0, 0.0), Complex64::new(-c, 0.0), Complex64::new(c, 0.0), Complex64::new(0.0, 0.0)]
        };
        let q = 0.25 * kappa;
        let id = Matrix::identity(2).as_slice().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_modes(
            2,
            vec![
                FourierMode { k: vec![0, 0], coeff: id },
                FourierMode { k: vec![1, -1], coeff: j(q) },
                FourierMode { k: vec![-1, 1], coeff: j(q) },
                FourierMode { k: vec![1, 1], coeff: j(-q) },
                FourierMode { k: vec![-1, -1], coeff: j(-q) },
            ],
        )
    }

    /// Scalar field in `d = 1` from `(k, â_k)` pairs.
    pub fn scalar_1d(modes: &[(i32, Complex64)]) -> Result<Self> {
        Self::from_modes(1, modes.iter().map(|&(k, c)| FourierMode { k: vec![k], coeff: vec![c] }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[FourierMode] {
        &self.modes
    }

    /// Coefficient `â(k)`, zero when absent.
    pub fn coefficient(&self, k: &[i32], i: usize, j: usize) -> Complex64 {
        self.modes.iter().find(|m| m.k == k).map_or(Complex64::new(0.0, 0.0), |m| m.entry(i, j))
    }

    /// Largest `|k_i|` over all modes.
    pub fn max_frequency(&self) -> usize {
        self.modes.iter().flat_map(|m| m.k.iter()).map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn ellipticity(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    /// True when `a` is symmetric everywhere.
    pub fn is_symmetric(&self) -> bool {
        let d = self.dim;
        self.modes.iter().all(|m| (0..d).all(|i| (0..d).all(|j| (m.entry(i, j) - m.entry(j, i)).norm() <= 1e-15)))
    }

    /// `∫_{T^d} a dx`, the zero mode.
    pub fn mean(&self) -> Matrix {
        let zero = vec![0; self.dim];
        Matrix::from_fn(self.dim, self.dim, |i, j| self.coefficient(&zero, i, j).re)
    }

    /// Writes `a(x)` (row-major) and `b(x)` into the given buffers.
    pub fn eval_into(&self, x: &[f64], a: &mut [f64], b: &mut [f64]) {
        let d = self.dim;
        a.fill(0.0);
        b.fill(0.0);
        for m in &self.modes {
            let theta: f64 = 2.0 * PI * m.k.iter().zip(x).map(|(&k, &xi)| f64::from(k) * xi).sum::<f64>();
            let (s, c) = if theta == 0.0 { (0.0, 1.0) } else { theta.sin_cos() };
            for i in 0..d {
                let ki = 2.0 * PI * f64::from(m.k[i]);
                for j in 0..d {
                    let z = m.coeff[i * d + j];
                    a[i * d + j] += z.re * c - z.im * s;
                    if ki != 0.0 {
                        b[j] += ki * (-z.re * s - z.im * c);
                    }
                }
            }
        }
    }

    /// `a(x)` as a matrix.
    pub fn a(&self, x: &[f64]) -> Matrix {
        let mut a = Matrix::zeros(self.dim, self.dim);
        let mut b = vec![0.0; self.dim];
        self.eval_into(x, a.as_mut_slice(), &mut b);
        a
    }

    /// `b(x)`, with `b_j = Σ_i ∂_i a_ij`.
    pub fn b(&self, x: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; self.dim * self.dim];
        let mut b = vec![0.0; self.dim];
        self.eval_into(x, &mut a, &mut b);
        b
    }

    /// `σ(x) = √(a^S(x))`.
    pub fn sigma(&self, x: &[f64]) -> Result<Matrix> {
        let d = self.dim;
        let mut s = vec![0.0; d * d];
        sym_sqrt_into(&self.a(x).symmetric_part(), &mut s)?;
        Matrix::from_row_major(d, d, s)
    }

    fn sample_ellipticity(&self) -> (f64, f64) {
        let d = self.dim;
        let per_axis: usize = match d {
            1 => 256,
            2 => 48,
            3 => 16,
            _ => 8,
        };
        let count = per_axis.pow(d as u32);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut x = vec![0.0; d];
        let mut a = Matrix::zeros(d, d);
        let mut b = vec![0.0; d];
        for idx in 0..count {
            let mut r = idx;
            for xi in x.iter_mut() {
                *xi = (r % per_axis) as f64 / per_axis as f64 + 0.5 / (7.0 * per_axis as f64);
                r /= per_axis;
            }
            self.eval_into(&x, a.as_mut_slice(), &mut b);
            let (l, h) = sym_extreme_eigenvalues(&a.symmetric_part());
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    }
}

fn sym_extreme_eigenvalues(s: &Matrix) -> (f64, f64) {
    match s.rows() {
        1 => (s[(0, 0)], s[(0, 0)]),
        2 => {
            let mid = 0.5 * (s[(0, 0)] + s[(1, 1)]);
            let r = (0.5 * (s[(0, 0)] - s[(1, 1)])).hypot(s[(0, 1)]);
            (mid - r, mid + r)
        }
        _ => {
            let v = s.symmetric_eigenvalues();
            (v[0], v[v.len() - 1])
        }
    }
}

/// Symmetric square root of a symmetric positive-definite matrix into
/// `out`, without allocation for `d ≤ 2`.
fn sym_sqrt_into(s: &Matrix, out: &mut [f64]) -> Result<()> {
    match s.rows() {
        1 => {
            let v = s[(0, 0)];
            if !(v > 0.0) {
                return Err(Error::NotPositiveDefinite { min_eigenvalue: v });
            }
            out[0] = v.sqrt();
        }
        2 => sqrt_2x2_into(s[(0, 0)], s[(0, 1)], s[(1, 1)], out)?,
        _ => {
            let (lo, _) = sym_extreme_eigenvalues(s);
            if !(lo > 0.0) {
                return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
            }
            out.copy_from_slice(s.psd_sqrt(0.0)?.as_slice());
        }
    }
    Ok(())
}

#[inline]
fn sqrt_2x2_into(p: f64, r: f64, q: f64, out: &mut [f64]) -> Result<()> {
    let det = p * q - r * r;
    if !(det > 0.0 && p + q > 0.0) {
        let mid = 0.5 * (p + q);
        let min_eigenvalue = mid - (0.5 * (p - q)).hypot(r);
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    let sd = det.sqrt();
    let den = (p + q + 2.0 * sd).sqrt().recip();
    out[0] = (p + sd) * den;
    out[1] = r * den;
    out[2] = r * den;
    out[3] = (q + sd) * den;
    Ok(())
}

/// Euler-Maruyama path on `[0, horizon]` with step `h`, started uniformly
/// on `[−½, ½]^d`.
pub fn simulate_periodic_diffusion<R: Rng + ?Sized>(
    coeffs: &PeriodicCoefficients,
    horizon: f64,
    h: f64,
    rng: &mut R,
) -> Result<SampledPath> {
    let steps = step_count(horizon, h)?;
    let d = coeffs.dim;
    let mut x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut values = Vec::with_capacity(d * (steps + 1));
    values.extend_from_slice(&x);
    let mut a = Matrix::zeros(d, d);
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    let mut xi = vec![0.0; d];
    let noise = (2.0 * h).sqrt();
    for _ in 0..steps {
        coeffs.eval_into(&x, a.as_mut_slice(), &mut b);
        if d == 2 {
            let r = 0.5 * (a[(0, 1)] + a[(1, 0)]);
            sqrt_2x2_into(a[(0, 0)], r, a[(1, 1)], &mut sigma)?;
        } else {
            sym_sqrt_into(&a.symmetric_part(), &mut sigma)?;
        }
        for z in xi.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let diffusion: f64 = (0..d).map(|j| sigma[i * d + j] * xi[j]).sum();
            x[i] += b[i] * h + noise * diffusion;
        }
        values.extend_from_slice(&x);
    }
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    times[steps] = horizon;
    SampledPath::from_flat(d, times, values, Interpretation::PiecewiseLinear)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{replica_rng, Purpose};

    #[test]
    fn perturbation_matches_closed_form() {
        let c = PeriodicCoefficients::antisym_perturbation(0.5).unwrap();
        let x = [0.13, 0.71];
        let s = (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
        let a = c.a(&x);
        assert!((a[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((a[(0, 1)] + 0.5 * s).abs() < 1e-15);
        assert!((a[(1, 0)] - 0.5 * s).abs() < 1e-15);
        // b_j = Σ_i ∂_i a_ij: b_0 = ∂_1 a_10, b_1 = ∂_0 a_01.
        let ds0 = 2.0 * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin();
        let ds1 = 2.0 * PI * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos();
        let b = c.b(&x);
        assert!((b[0] - 0.5 * ds1).abs() < 1e-13);
        assert!((b[1] + 0.5 * ds0).abs() < 1e-13);
        assert_eq!(c.ellipticity(), (1.0, 1.0));
        assert!(!c.is_symmetric());
    }

    #[test]
    fn drift_has_zero_mean() {
        let c = PeriodicCoefficients::scalar_1d(&[
            (0, Complex64::new(2.0, 0.0)),
            (1, Complex64::new(0.3, 0.4)),
            (-1, Complex64::new(0.3, -0.4)),
        ])
        .unwrap();
        let n = 64;
        let mean: f64 = (0..n).map(|k| c.b(&[k as f64 / n as f64])[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn sigma_squares_to_symmetric_part() {
        let c = PeriodicCoefficients::antisym_perturbation(0.5).unwrap();
        let s = c.sigma(&[0.3, 0.4]).unwrap();
        assert!((&s.matmul(&s) - &c.a(&[0.3, 0.4]).symmetric_part()).max_abs() < 1e-14);
    }

    #[test]
    fn rejects_invalid_fields() {
        let not_real = PeriodicCoefficients::scalar_1d(&[(0, Complex64::new(1.0, 0.0)), (1, Complex64::new(0.1, 0.0))]);
        assert!(not_real.is_err());
        let degenerate = PeriodicCoefficients::scalar_1d(&[
            (0, Complex64::new(1.0, 0.0)),
            (1, Complex64::new(0.6, 0.0)),
            (-1, Complex64::new(0.6, 0.0)),
        ]);
        assert!(matches!(degenerate, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn spec_round_trip_through_modes() {
        let spec = PeriodicSpec::Modes {
            dim: 2,
            modes: vec![MatrixModeSpec { k: vec![0, 0], re: vec![vec![2.0, 0.0], vec![0.0, 1.0]], im: None }],
        };
        let c = PeriodicCoefficients::from_spec(&spec).unwrap();
        assert_eq!(c.mean(), Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap());
    }

    #[test]
    fn identity_field_is_brownian() {
        let c = PeriodicCoefficients::identity(2).unwrap();
        let mut rng = replica_rng(2, Purpose::Dynamics, 0);
        let p = simulate_periodic_diffusion(&c, 1.0, 0.01, &mut rng).unwrap();
        assert_eq!(p.len(), 101);
        assert!(p.start().iter().all(|x| x.abs() <= 0.5));
        assert!(simulate_periodic_diffusion(&c, 1.0, 0.3, &mut rng).is_err());
    }
}
