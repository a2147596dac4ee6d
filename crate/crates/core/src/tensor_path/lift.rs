use serde::{Deserialize, Serialize};

use super::path::{Interpretation, JumpPath, SampledPath};
use crate::error::{Error, Result};
use crate::matrix::{CompensatedMatrix, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftKind {
    /// Left-point (Itô) iterated integrals.
    Ito,
    /// Exact iterated integrals of the piecewise-linear interpolant.
    StratonovichLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    Jump,
    Sampled,
}

/// A path together with its running second level `𝕏_{0,t_k}` on the
/// path's event or grid times. Two-parameter values come from Chen's
/// relation, see [`Level2Lift::area`].
#[derive(Clone, Debug)]
pub struct Level2Lift {
    kind: LiftKind,
    base_kind: BaseKind,
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    /// Row-major `times.len() × dim²`.
    running: Vec<f64>,
}

impl Level2Lift {
    pub fn kind(&self) -> LiftKind {
        self.kind
    }

    pub fn base_kind(&self) -> BaseKind {
        self.base_kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values_flat(&self) -> &[f64] {
        &self.values
    }

    fn running_slice(&self, k: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        &self.running[k * d2..(k + 1) * d2]
    }

    /// `𝕏_{0,t_k}`.
    pub fn running(&self, k: usize) -> Matrix {
        Matrix::from_row_major(self.dim, self.dim, self.running_slice(k).to_vec()).expect("square")
    }

    /// `𝕏_{0,T}`.
    pub fn total(&self) -> Matrix {
        self.running(self.len() - 1)
    }

    /// `X_{0,T}`.
    pub fn total_increment(&self) -> Vec<f64> {
        let last = self.len() - 1;
        self.value(last).iter().zip(self.value(0)).map(|(b, a)| b - a).collect()
    }

    /// Index of a grid time; the time must match exactly.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = self.times.partition_point(|&s| s < t);
        if k < self.times.len() && self.times[k] == t {
            Ok(k)
        } else {
            Err(Error::OffGrid { time: t })
        }
    }

    /// `𝕏_{t_i,t_j} = 𝕏_{0,t_j} − 𝕏_{0,t_i} − X_{0,t_i} ⊗ X_{t_i,t_j}` for
    /// grid indices `i ≤ j`.
    pub fn area(&self, i: usize, j: usize) -> Matrix {
        let mut out = Matrix::zeros(self.dim, self.dim);
        self.area_into(i, j, out.as_mut_slice());
        out
    }

    /// Allocation-free form of [`Level2Lift::area`].
    pub fn area_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let d = self.dim;
        let (xi, xj, x0) = (self.value(i), self.value(j), self.value(0));
        let (ri, rj) = (self.running_slice(i), self.running_slice(j));
        for a in 0..d {
            let x0s = xi[a] - x0[a];
            for b in 0..d {
                let k = a * d + b;
                out[k] = rj[k] - ri[k] - x0s * (xj[b] - xi[b]);
            }
        }
    }

    /// Frobenius norm of `𝕏_{t_i,t_j}` without allocating.
    pub fn area_norm(&self, i: usize, j: usize) -> f64 {
        let d = self.dim;
        let (xi, xj, x0) = (self.value(i), self.value(j), self.value(0));
        let (ri, rj) = (self.running_slice(i), self.running_slice(j));
        let mut acc = 0.0;
        for a in 0..d {
            let x0s = xi[a] - x0[a];
            for b in 0..d {
                let k = a * d + b;
                let v = rj[k] - ri[k] - x0s * (xj[b] - xi[b]);
                acc += v * v;
            }
        }
        acc.sqrt()
    }

    /// Increment `X_{t_i,t_j}`.
    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.value(j).iter().zip(self.value(i)).map(|(b, a)| b - a).collect()
    }

    /// The first level as a sampled path on the lift's grid.
    pub fn base_path(&self) -> SampledPath {
        let interp = match self.base_kind {
            BaseKind::Jump => Interpretation::GridSamples,
            BaseKind::Sampled => Interpretation::PiecewiseLinear,
        };
        SampledPath::from_flat(self.dim, self.times.clone(), self.values.clone(), interp).expect("lift grid is valid")
    }

    /// Restriction to the grid indices `idx` (strictly increasing, first 0).
    /// Running values are re-based so that the restricted lift starts at
    /// zero; two-parameter areas between retained points are unchanged.
    pub fn restrict(&self, idx: &[usize]) -> Result<Level2Lift> {
        if idx.first() != Some(&0) || idx.windows(2).any(|w| w[1] <= w[0]) || idx.iter().any(|&k| k >= self.len()) {
            return Err(Error::InvalidPath("restriction indices must start at 0 and increase".into()));
        }
        let d2 = self.dim * self.dim;
        let mut running = Vec::with_capacity(idx.len() * d2);
        for &k in idx {
            running.extend_from_slice(self.area(0, k).as_slice());
        }
        Ok(Level2Lift {
            kind: self.kind,
            base_kind: self.base_kind,
            dim: self.dim,
            times: idx.iter().map(|&k| self.times[k]).collect(),
            values: idx.iter().flat_map(|&k| self.value(k).iter().copied()).collect(),
            running,
        })
    }

    /// Keeps every `stride`-th grid point and the last one.
    pub fn subsample(&self, stride: usize) -> Level2Lift {
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
        if *idx.last().expect("non-empty") != n - 1 {
            idx.push(n - 1);
        }
        self.restrict(&idx).expect("valid indices")
    }
}

fn collect_running(dim: usize, len: usize) -> Vec<f64> {
    Vec::with_capacity(len * dim * dim)
}

/// Left-point iterated integrals `Σ_{i≤k} (X_{t_i−} − X_0) ⊗ ΔX_i` of a
/// càdlàg step path, on its event grid.
pub fn ito_lift_jump(path: &JumpPath) -> Level2Lift {
    let d = path.dim();
    let times = path.event_times();
    let values = path.event_values();
    let mut running = collect_running(d, times.len());
    let mut acc = CompensatedMatrix::zeros(d, d);
    let x0 = path.start();
    let mut rel = vec![0.0; d];
    acc.extend_into(&mut running);
    for k in 0..path.num_jumps() {
        let left = &values[k * d..(k + 1) * d];
        for (r, (a, b)) in rel.iter_mut().zip(left.iter().zip(x0)) {
            *r = a - b;
        }
        acc.add_outer_scaled(&rel, path.increment(k), 1.0);
        acc.extend_into(&mut running);
    }
    if times.len() > path.num_jumps() + 1 {
        acc.extend_into(&mut running);
    }
    Level2Lift { kind: LiftKind::Ito, base_kind: BaseKind::Jump, dim: d, times, values, running }
}

/// Exact iterated integrals of the piecewise-linear interpolant:
/// `Σ_{i<k} ½(X_{t_i} + X_{t_{i+1}} − 2X_0) ⊗ X_{t_i,t_{i+1}}`.
pub fn strato_lift_linear(path: &SampledPath) -> Level2Lift {
    let d = path.dim();
    let n = path.len();
    let x0 = path.start().to_vec();
    let mut running = collect_running(d, n);
    let mut acc = CompensatedMatrix::zeros(d, d);
    let mut mid = vec![0.0; d];
    let mut inc = vec![0.0; d];
    acc.extend_into(&mut running);
    for i in 0..n - 1 {
        let (a, b) = (path.value(i), path.value(i + 1));
        for c in 0..d {
            mid[c] = 0.5 * (a[c] + b[c]) - x0[c];
            inc[c] = b[c] - a[c];
        }
        acc.add_outer_scaled(&mid, &inc, 1.0);
        acc.extend_into(&mut running);
    }
    Level2Lift {
        kind: LiftKind::StratonovichLinear,
        base_kind: BaseKind::Sampled,
        dim: d,
        times: path.times().to_vec(),
        values: path.values_flat().to_vec(),
        running,
    }
}

/// Left-point Riemann sums `Σ_{i<k} (X_{t_i} − X_0) ⊗ X_{t_i,t_{i+1}}` on
/// the sampling grid.
pub fn ito_lift_sampled(path: &SampledPath) -> Level2Lift {
    let d = path.dim();
    let n = path.len();
    let x0 = path.start().to_vec();
    let mut running = collect_running(d, n);
    let mut acc = CompensatedMatrix::zeros(d, d);
    let mut rel = vec![0.0; d];
    let mut inc = vec![0.0; d];
    acc.extend_into(&mut running);
    for i in 0..n - 1 {
        let (a, b) = (path.value(i), path.value(i + 1));
        for c in 0..d {
            rel[c] = a[c] - x0[c];
            inc[c] = b[c] - a[c];
        }
        acc.add_outer_scaled(&rel, &inc, 1.0);
        acc.extend_into(&mut running);
    }
    Level2Lift {
        kind: LiftKind::Ito,
        base_kind: BaseKind::Sampled,
        dim: d,
        times: path.times().to_vec(),
        values: path.values_flat().to_vec(),
        running,
    }
}

/// Running `½ Σ_{σ_j ≤ t} (ΔX_{σ_j})^{⊗2}` on the event grid of the path;
/// equals the interpolated lift minus the left-point lift.
pub fn interpolation_gap(path: &JumpPath) -> Vec<(f64, Matrix)> {
    let d = path.dim();
    let times = path.event_times();
    let mut acc = CompensatedMatrix::zeros(d, d);
    let mut out = Vec::with_capacity(times.len());
    out.push((0.0, acc.value()));
    for k in 0..path.num_jumps() {
        let inc = path.increment(k);
        acc.add_outer_scaled(inc, inc, 0.5);
        out.push((times[k + 1], acc.value()));
    }
    if times.len() > path.num_jumps() + 1 {
        out.push((path.horizon(), acc.value()));
    }
    out
}

/// Two-parameter value `𝕏_{s,t}` for grid times `s ≤ t`.
pub fn chen_reconstruct(lift: &Level2Lift, s: f64, t: f64) -> Result<Matrix> {
    if s > t {
        return Err(Error::TimeOrder { s, t });
    }
    let i = lift.index_of(s)?;
    let j = lift.index_of(t)?;
    Ok(lift.area(i, j))
}

/// `𝕏_{r,t} − 𝕏_{r,s} − 𝕏_{s,t} − X_{r,s} ⊗ X_{s,t}` for grid times
/// `r ≤ s ≤ t`.
pub fn chen_defect(lift: &Level2Lift, r: f64, s: f64, t: f64) -> Result<Matrix> {
    if r > s {
        return Err(Error::TimeOrder { s: r, t: s });
    }
    let rt = chen_reconstruct(lift, r, t)?;
    let rs = chen_reconstruct(lift, r, s)?;
    let st = chen_reconstruct(lift, s, t)?;
    let (i, j, k) = (lift.index_of(r)?, lift.index_of(s)?, lift.index_of(t)?);
    let cross = Matrix::outer(&lift.increment(i, j), &lift.increment(j, k));
    Ok(rt - rs - st - cross)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn neg(v: Vec<f64>) -> Vec<f64> {
        v.into_iter().map(|x| -x).collect()
    }

    #[test]
    fn ito_single_jump_is_zero() {
        let p = JumpPath::new(vec![0.0, 0.0], vec![0.5], vec![e(2, 0)], 1.0).unwrap();
        assert_eq!(ito_lift_jump(&p).total(), Matrix::zeros(2, 2));
    }

    #[test]
    fn ito_two_jumps_sees_first() {
        let p = JumpPath::new(vec![0.0, 0.0], vec![0.3, 0.6], vec![e(2, 0), e(2, 1)], 1.0).unwrap();
        assert_eq!(ito_lift_jump(&p).total(), Matrix::outer(&e(2, 0), &e(2, 1)));
        let q = JumpPath::new(vec![0.0], vec![0.3, 0.6], vec![vec![1.0], vec![1.0]], 1.0).unwrap();
        assert_eq!(ito_lift_jump(&q).total()[(0, 0)], 1.0);
    }

    #[test]
    fn ito_constant_between_jumps() {
        let p = JumpPath::new(vec![0.0], vec![0.3, 0.6], vec![vec![1.0], vec![1.0]], 1.0).unwrap();
        let l = ito_lift_jump(&p);
        assert_eq!(l.times(), &[0.0, 0.3, 0.6, 1.0]);
        assert_eq!(l.running(2), l.running(3));
    }

    #[test]
    fn strato_zigzag_and_staircase() {
        let s = SampledPath::uniform(1, 1.0, vec![0.0, 1.0, 0.0], Interpretation::PiecewiseLinear).unwrap();
        assert_eq!(strato_lift_linear(&s).total()[(0, 0)], 0.0);
        let s2 = SampledPath::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            Interpretation::PiecewiseLinear,
        )
        .unwrap();
        let want = Matrix::from_rows(&[&[0.5, 1.0], &[0.0, 0.5]]).unwrap();
        assert_eq!(strato_lift_linear(&s2).total(), want);
    }

    #[test]
    fn strato_symmetric_part_is_half_square() {
        let s = SampledPath::new(
            vec![0.0, 0.1, 0.5, 0.7],
            vec![vec![0.3, -1.0], vec![1.2, 0.4], vec![-0.5, 2.0], vec![0.1, 0.1]],
            Interpretation::PiecewiseLinear,
        )
        .unwrap();
        let l = strato_lift_linear(&s);
        let inc = l.total_increment();
        let want = Matrix::outer(&inc, &inc).scale(0.5);
        assert!((&l.total().symmetric_part() - &want).max_abs() < 1e-14);
    }

    #[test]
    fn ito_sampled_examples() {
        let c = SampledPath::uniform(2, 0.5, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0], Interpretation::GridSamples).unwrap();
        assert_eq!(ito_lift_sampled(&c).total(), Matrix::zeros(2, 2));
        let s = SampledPath::uniform(1, 1.0, vec![0.0, 1.0, 2.0], Interpretation::GridSamples).unwrap();
        assert_eq!(ito_lift_sampled(&s).total()[(0, 0)], 1.0);
    }

    #[test]
    fn ito_and_strato_agree_under_refinement() {
        let gap = |n: usize| {
            let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
            let vals: Vec<Vec<f64>> = times.iter().map(|&t| vec![(3.0 * t).sin(), t * t - 0.2 * t]).collect();
            let s = SampledPath::new(times, vals, Interpretation::PiecewiseLinear).unwrap();
            (&ito_lift_sampled(&s).total() - &strato_lift_linear(&s).total()).max_abs()
        };
        let (g1, g2, g3) = (gap(50), gap(100), gap(200));
        assert!(g2 < 0.6 * g1 && g3 < 0.6 * g2, "{g1} {g2} {g3}");
        assert!(g3 < 2e-2);
    }

    #[test]
    fn gap_examples() {
        let one = JumpPath::new(vec![0.0, 0.0], vec![0.5], vec![e(2, 0)], 1.0).unwrap();
        let g = interpolation_gap(&one);
        assert_eq!(g.last().unwrap().1, Matrix::outer(&e(2, 0), &e(2, 0)).scale(0.5));
        let none = JumpPath::new(vec![0.0, 0.0], vec![], vec![], 1.0).unwrap();
        assert_eq!(interpolation_gap(&none).last().unwrap().1, Matrix::zeros(2, 2));
        let three =
            JumpPath::new(vec![0.0, 0.0], vec![0.1, 0.2, 0.3], vec![e(2, 0), e(2, 1), neg(e(2, 0))], 1.0).unwrap();
        let want = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.5]]).unwrap();
        assert_eq!(interpolation_gap(&three).last().unwrap().1, want);
    }

    #[test]
    fn gap_matches_lift_difference() {
        let p = JumpPath::new(
            vec![0.2, -0.1],
            vec![0.1, 0.25, 0.4, 0.9],
            vec![e(2, 0), e(2, 1), neg(e(2, 0)), vec![0.5, 0.5]],
            1.0,
        )
        .unwrap();
        let ito = ito_lift_jump(&p);
        let strato = strato_lift_linear(&p.linear_interpolation());
        for (k, (t, g)) in interpolation_gap(&p).iter().enumerate() {
            assert_eq!(ito.times()[k], *t);
            let diff = &strato.running(k) - &ito.running(k);
            assert!((&diff - g).max_abs() < 1e-14);
        }
    }

    #[test]
    fn chen_queries() {
        let p = JumpPath::new(vec![0.0, 0.0], vec![0.3, 0.6], vec![e(2, 0), e(2, 1)], 1.0).unwrap();
        let l = ito_lift_jump(&p);
        assert_eq!(chen_reconstruct(&l, 0.3, 0.3).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(chen_reconstruct(&l, 0.0, 0.6).unwrap(), l.running(2));
        assert!(matches!(chen_reconstruct(&l, 0.6, 0.3), Err(Error::TimeOrder { .. })));
        assert!(matches!(chen_reconstruct(&l, 0.0, 0.5), Err(Error::OffGrid { .. })));
        assert!(chen_defect(&l, 0.0, 0.3, 1.0).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn one_dimensional_strato_is_half_square() {
        let s = SampledPath::uniform(1, 0.25, vec![0.5, 1.0, -0.3, 2.0, 0.0], Interpretation::PiecewiseLinear).unwrap();
        let l = strato_lift_linear(&s);
        for k in 0..l.len() {
            let x = l.value(k)[0] - l.value(0)[0];
            assert!((l.running(k)[(0, 0)] - 0.5 * x * x).abs() < 1e-14);
        }
    }
}
