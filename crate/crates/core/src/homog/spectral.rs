//! Fourier-Galerkin solver for the cell problem `−∇·(a∇Φ) = b` on the torus.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::PeriodicCoefficients;

/// Target for the certified residual `‖∇·(a∇Φ) + b‖_{L²}`.
pub const RESIDUAL_TARGET: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Frequencies `m ∈ Z^d` with `|m_i| ≤ cutoff`, indexed lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyBox {
    pub dim: usize,
    pub cutoff: usize,
}

impl FrequencyBox {
    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frequency(&self, mut idx: usize, out: &mut [i32]) {
        let side = self.side();
        for slot in out.iter_mut().rev() {
            *slot = (idx % side) as i32 - self.cutoff as i32;
            idx /= side;
        }
    }

    pub fn index(&self, m: &[i32]) -> Option<usize> {
        let k = self.cutoff as i32;
        let side = self.side();
        let mut idx = 0;
        for &mi in m {
            if mi.abs() > k {
                return None;
            }
            idx = idx * side + (mi + k) as usize;
        }
        Some(idx)
    }

    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }
}

/// Real fields on `T^d` stored as truncated Fourier coefficients; one
/// coefficient vector per component.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusField {
    pub frequencies: FrequencyBox,
    pub components: Vec<Vec<Complex64>>,
    /// Certified residual of each component's cell problem.
    pub residuals: Vec<f64>,
}

impl TorusField {
    pub fn dim(&self) -> usize {
        self.frequencies.dim
    }

    pub fn cutoff(&self) -> usize {
        self.frequencies.cutoff
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// `Φ^c(x)`.
    pub fn value(&self, c: usize, x: &[f64]) -> f64 {
        self.synthesize(c, x, None)
    }

    /// `∂_k Φ^c(x)`.
    pub fn derivative(&self, c: usize, k: usize, x: &[f64]) -> f64 {
        self.synthesize(c, x, Some(k))
    }

    fn synthesize(&self, c: usize, x: &[f64], deriv: Option<usize>) -> f64 {
        let fb = &self.frequencies;
        let mut m = vec![0i32; fb.dim];
        let mut sum = 0.0;
        for (idx, &coef) in self.components[c].iter().enumerate() {
            if coef == ZERO {
                continue;
            }
            fb.frequency(idx, &mut m);
            let theta = 2.0 * PI * m.iter().zip(x).map(|(&mi, &xi)| f64::from(mi) * xi).sum::<f64>();
            let mut z = coef * Complex64::from_polar(1.0, theta);
            if let Some(k) = deriv {
                z *= Complex64::new(0.0, 2.0 * PI * f64::from(m[k]));
            }
            sum += z.re;
        }
        sum
    }

    /// Fourier coefficients of `∇Φ^c + e_c` at every box frequency.
    pub fn shifted_gradient(&self, c: usize) -> Vec<Vec<Complex64>> {
        let fb = &self.frequencies;
        let d = fb.dim;
        let mut m = vec![0i32; d];
        (0..fb.len())
            .map(|idx| {
                fb.frequency(idx, &mut m);
                let phi = self.components[c][idx];
                (0..d)
                    .map(|k| {
                        let mut g = phi * Complex64::new(0.0, 2.0 * PI * f64::from(m[k]));
                        if idx == fb.zero_index() && k == c {
                            g += 1.0;
                        }
                        g
                    })
                    .collect()
            })
            .collect()
    }

    /// Fourier coefficients of `∇Φ^c`.
    pub fn gradient(&self, c: usize) -> Vec<Vec<Complex64>> {
        let mut g = self.shifted_gradient(c);
        g[self.frequencies.zero_index()][c] -= 1.0;
        g
    }
}

/// Mode `q` of `a` as a dense complex matrix.
struct Mode {
    q: Vec<i32>,
    a: Vec<Complex64>,
}

struct Operator<'a> {
    fb: &'a FrequencyBox,
    modes: Vec<Mode>,
    freqs: Vec<i32>,
}

impl<'a> Operator<'a> {
    fn new(coeffs: &PeriodicCoefficients, fb: &'a FrequencyBox) -> Self {
        let modes = coeffs.modes().iter().map(|m| Mode { q: m.k.clone(), a: m.coeff.clone() }).collect();
        let d = fb.dim;
        let mut freqs = vec![0i32; fb.len() * d];
        for idx in 0..fb.len() {
            fb.frequency(idx, &mut freqs[idx * d..(idx + 1) * d]);
        }
        Operator { fb, modes, freqs }
    }

    fn m(&self, idx: usize) -> &[i32] {
        let d = self.fb.dim;
        &self.freqs[idx * d..(idx + 1) * d]
    }

    /// `4π² mᵀ â(q) n`.
    fn symbol(&self, mode: &Mode, m: &[i32], n: &[i32]) -> Complex64 {
        let d = self.fb.dim;
        let mut acc = ZERO;
        for (i, &mi) in m.iter().enumerate().take(d) {
            if mi == 0 {
                continue;
            }
            for (k, &nk) in n.iter().enumerate().take(d) {
                if nk != 0 {
                    acc += mode.a[i * d + k] * f64::from(mi * nk);
                }
            }
        }
        acc * (4.0 * PI * PI)
    }

    /// `(Lφ)(m)` for an arbitrary frequency `m` and `φ` supported in the box.
    fn apply_at(&self, m: &[i32], phi: &[Complex64], scratch: &mut [i32]) -> Complex64 {
        let mut acc = ZERO;
        for mode in &self.modes {
            for (s, (&mi, &qi)) in scratch.iter_mut().zip(m.iter().zip(&mode.q)) {
                *s = mi - qi;
            }
            if let Some(j) = self.fb.index(scratch) {
                if j != self.fb.zero_index() && phi[j] != ZERO {
                    acc += self.symbol(mode, m, scratch) * phi[j];
                }
            }
        }
        acc
    }

    /// Galerkin operator on the box, identity on the zero mode.
    fn apply(&self, phi: &[Complex64], out: &mut [Complex64]) {
        let mut scratch = vec![0i32; self.fb.dim];
        let zero = self.fb.zero_index();
        for (idx, o) in out.iter_mut().enumerate() {
            *o = if idx == zero { phi[idx] } else { self.apply_at(self.m(idx), phi, &mut scratch) };
        }
    }

    fn diagonal(&self) -> Result<Vec<Complex64>> {
        let zero_q = vec![0i32; self.fb.dim];
        let zero_mode = self.modes.iter().find(|m| m.q == zero_q);
        let mut diag = vec![Complex64::new(1.0, 0.0); self.fb.len()];
        for (idx, slot) in diag.iter_mut().enumerate() {
            if idx == self.fb.zero_index() {
                continue;
            }
            let m = self.m(idx);
            let v = zero_mode.map_or(ZERO, |z| self.symbol(z, m, m));
            if v.norm() == 0.0 {
                return Err(Error::Singular(format!("zero diagonal at frequency {m:?}")));
            }
            *slot = v;
        }
        Ok(diag)
    }
}

/// Fourier coefficients of `b_j = Σ_i ∂_i a_ij` on the box.
fn drift_rhs(coeffs: &PeriodicCoefficients, fb: &FrequencyBox, j: usize) -> Vec<Complex64> {
    let d = fb.dim;
    let mut rhs = vec![ZERO; fb.len()];
    for mode in coeffs.modes() {
        if let Some(idx) = fb.index(&mode.k) {
            for i in 0..d {
                rhs[idx] += mode.entry(i, j) * Complex64::new(0.0, 2.0 * PI * f64::from(mode.k[i]));
            }
        }
    }
    rhs
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Right-preconditioned BiCGSTAB for `L x = rhs` with Jacobi preconditioner.
fn bicgstab(
    op: &Operator<'_>,
    diag: &[Complex64],
    rhs: &[Complex64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<Complex64>> {
    let n = rhs.len();
    let mut x = vec![ZERO; n];
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let r_hat = r.clone();
    let mut p = vec![ZERO; n];
    let mut v = vec![ZERO; n];
    let mut y = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    let mut t = vec![ZERO; n];
    let mut rho = Complex64::new(1.0, 0.0);
    let mut alpha = Complex64::new(1.0, 0.0);
    let mut omega = Complex64::new(1.0, 0.0);
    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            return Err(Error::Singular("BiCGSTAB breakdown (rho = 0)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] / diag[i];
        }
        op.apply(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.norm() == 0.0 {
            return Err(Error::Singular("BiCGSTAB breakdown (r̂·v = 0)".into()));
        }
        alpha = rho / denom;
        for i in 0..n {
            x[i] += alpha * y[i];
            r[i] -= alpha * v[i];
        }
        if norm(&r) <= rel_tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        op.apply(&z, &mut t);
        let tt = dot(&t, &t);
        if tt.norm() == 0.0 {
            return Ok(x);
        }
        omega = dot(&t, &r) / tt;
        for i in 0..n {
            x[i] += omega * z[i];
            r[i] -= omega * t[i];
        }
        if norm(&r) <= rel_tol * bnorm {
            return Ok(x);
        }
        if omega.norm() == 0.0 {
            return Err(Error::Singular("BiCGSTAB breakdown (omega = 0)".into()));
        }
    }
    Ok(x)
}

/// `‖∇·(a∇Φ) + b‖_{L²}` over every frequency the product can reach,
/// including those outside the Galerkin box.
fn full_residual(op: &Operator<'_>, coeffs: &PeriodicCoefficients, phi: &[Complex64], j: usize) -> f64 {
    let fb = op.fb;
    let wide = FrequencyBox { dim: fb.dim, cutoff: fb.cutoff + coeffs.max_frequency() };
    let rhs = drift_rhs(coeffs, &wide, j);
    let mut m = vec![0i32; fb.dim];
    let mut scratch = vec![0i32; fb.dim];
    let mut sum = 0.0;
    for (idx, r) in rhs.iter().enumerate() {
        wide.frequency(idx, &mut m);
        if m.iter().all(|&x| x == 0) {
            continue;
        }
        sum += (op.apply_at(&m, phi, &mut scratch) - r).norm_sqr();
    }
    sum.sqrt()
}

/// Solves `−∇·(a∇Φ^j) = b_j` for every `j` on frequencies `|m_i| ≤ cutoff`
/// with `Φ` of zero mean, and certifies the residual.
pub fn torus_poisson_solve(coeffs: &PeriodicCoefficients, cutoff: usize) -> Result<TorusField> {
    if cutoff == 0 {
        return Err(Error::param("cutoff", "frequency cutoff must be positive"));
    }
    let d = coeffs.dim();
    let fb = FrequencyBox { dim: d, cutoff };
    let op = Operator::new(coeffs, &fb);
    let diag = op.diagonal()?;
    let mut components = Vec::with_capacity(d);
    let mut residuals = Vec::with_capacity(d);
    for j in 0..d {
        let rhs = drift_rhs(coeffs, &fb, j);
        let mut phi = bicgstab(&op, &diag, &rhs, 1e-14, 5000)?;
        phi[fb.zero_index()] = ZERO;
        let res = full_residual(&op, coeffs, &phi, j);
        if !(res <= RESIDUAL_TARGET) {
            return Err(Error::NotConverged { residual: res, target: RESIDUAL_TARGET, cutoff });
        }
        components.push(phi);
        residuals.push(res);
    }
    Ok(TorusField { frequencies: fb, components, residuals })
}

/// Doubles the cutoff from `start` until the residual is certified or
/// `max_cutoff` is exceeded.
pub fn torus_poisson_solve_adaptive(
    coeffs: &PeriodicCoefficients,
    start: usize,
    max_cutoff: usize,
) -> Result<TorusField> {
    let mut k = start.max(1);
    loop {
        match torus_poisson_solve(coeffs, k) {
            Err(Error::NotConverged { .. }) if 2 * k <= max_cutoff => k *= 2,
            other => return other,
        }
    }
}

/// `∫ u·S v dx` for real vector fields `u`, `v` on the box and a real matrix
/// field with coefficients `s(q)`.
pub(crate) fn bilinear(
    fb: &FrequencyBox,
    u: &[Vec<Complex64>],
    v: &[Vec<Complex64>],
    s: &[(Vec<i32>, Vec<Complex64>)],
) -> Complex64 {
    let d = fb.dim;
    let mut m = vec![0i32; d];
    let mut n = vec![0i32; d];
    let mut acc = ZERO;
    for (idx, ui) in u.iter().enumerate().take(fb.len()) {
        if ui.iter().all(|c| *c == ZERO) {
            continue;
        }
        fb.frequency(idx, &mut m);
        for (q, sq) in s {
            for k in 0..d {
                n[k] = m[k] - q[k];
            }
            if let Some(j) = fb.index(&n) {
                for a in 0..d {
                    let ua = ui[a].conj();
                    if ua == ZERO {
                        continue;
                    }
                    for b in 0..d {
                        acc += ua * sq[a * d + b] * v[j][b];
                    }
                }
            }
        }
    }
    acc
}
