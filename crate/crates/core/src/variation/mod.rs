//! p-variation of paths and of two-parameter area processes.
//!
//! For a piecewise-linear path the map `u ↦ |X_u − X_s|^p` is convex on
//! each segment (a convex function of an affine map, `p ≥ 1`), so moving a
//! partition point inside a segment to one of the segment's endpoints never
//! decreases the partition sum. For a step path the same holds with the
//! jump times (and left limits, which coincide with the previous value).
//! Hence the supremum over all partitions is attained on grid points and
//! the dynamic program below is exact for both path classes.

mod skeleton;

use serde::{Deserialize, Serialize};

pub use skeleton::{dyadic_skeleton, pvar_dyadic_lower, SkeletonInput};

use crate::error::{Error, Result};
use crate::rng::{hash_words, mix64};
use crate::tensor_path::{JumpPath, Level2Lift, SampledPath};

/// Largest point count accepted by the exhaustive oracle.
pub const BRUTE_FORCE_MAX_POINTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PvarMethod {
    DpExact,
    BruteForce,
    DyadicLower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvarResult {
    pub value: f64,
    #[serde(rename = "partition")]
    pub optimal_partition: Vec<usize>,
    pub method: PvarMethod,
}

impl PvarResult {
    /// `value^p`, the optimal partition sum.
    pub fn power_sum(&self, p: f64) -> f64 {
        self.value.powf(p)
    }
}

fn check_exponent(name: &'static str, p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param(name, format!("exponent must be finite and >= 1, got {p}")));
    }
    Ok(())
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn point(values: &[f64], dim: usize, k: usize) -> &[f64] {
    &values[k * dim..(k + 1) * dim]
}

fn check_points(values: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || !values.len().is_multiple_of(dim) {
        return Err(Error::Dimension(format!("{} values in dimension {dim}", values.len())));
    }
    let n = values.len() / dim;
    if n == 0 {
        return Err(Error::InvalidPath("p-variation of an empty sequence".into()));
    }
    Ok(n)
}

/// Sum of `incr(i_k, i_{k+1})^p` over the partition, folded left to right.
pub fn partition_sum(partition: &[usize], p: f64, incr: impl Fn(usize, usize) -> f64) -> f64 {
    partition.windows(2).fold(0.0, |acc, w| acc + incr(w[0], w[1]).powf(p))
}

/// Backtracks the argmax chain ending at `last`.
fn backtrack(prev: &[usize], last: usize) -> Vec<usize> {
    let mut chain = vec![last];
    let mut k = last;
    while k > 0 {
        k = prev[k];
        chain.push(k);
    }
    chain.reverse();
    chain
}

/// Upper bound on the best chain value through predecessors up to `i`.
type PruneBound<'a> = &'a dyn Fn(usize, usize, &[f64]) -> f64;

/// `V(0) = 0`, `V(j) = max_{i<j} V(i) + incr(i, j)^p`; returns `V` and the
/// argmax pointers. `bound(i, j)` may return an upper bound for the best
/// value reachable through any `i' ≤ i`, allowing an early exit; it must
/// be non-increasing as `i` decreases.
fn chain_dp(
    n: usize,
    p: f64,
    incr: impl Fn(usize, usize) -> f64,
    bound: Option<PruneBound<'_>>,
) -> (Vec<f64>, Vec<usize>) {
    let mut v = vec![0.0; n];
    let mut prev = vec![0usize; n];
    for j in 1..n {
        let mut best = f64::NEG_INFINITY;
        let mut arg = j - 1;
        for i in (0..j).rev() {
            if let Some(b) = bound {
                if b(i, j, &v) < best {
                    break;
                }
            }
            let cand = v[i] + incr(i, j).powf(p);
            if cand > best {
                best = cand;
                arg = i;
            }
        }
        v[j] = best;
        prev[j] = arg;
    }
    (v, prev)
}

/// Exact p-variation over grid partitions by dynamic programming, with
/// an exactness-preserving pruning rule (see module docs).
pub fn pvar_grid_dp(values: &[f64], dim: usize, p: f64) -> Result<PvarResult> {
    check_exponent("p", p)?;
    let n = check_points(values, dim)?;
    if n == 1 {
        return Ok(PvarResult { value: 0.0, optimal_partition: vec![0], method: PvarMethod::DpExact });
    }
    let x0 = point(values, dim, 0);
    // radius[i] = max_{k ≤ i} |X_k − X_0|, non-decreasing in i.
    let mut radius = Vec::with_capacity(n);
    let mut r = 0.0_f64;
    for k in 0..n {
        r = r.max(dist(point(values, dim, k), x0));
        radius.push(r);
    }
    let bound = |i: usize, j: usize, v: &[f64]| {
        // |X_j − X_{i'}| ≤ |X_j − X_0| + radius[i] for every i' ≤ i, and
        // V is non-decreasing, so this bounds every remaining candidate.
        let reach = dist(point(values, dim, j), x0) + radius[i];
        (v[i] + reach.powf(p)) * (1.0 + 1e-12)
    };
    let (v, prev) = chain_dp(n, p, |i, j| dist(point(values, dim, i), point(values, dim, j)), Some(&bound));
    Ok(PvarResult {
        value: v[n - 1].powf(1.0 / p),
        optimal_partition: backtrack(&prev, n - 1),
        method: PvarMethod::DpExact,
    })
}

/// Same dynamic program without pruning; reference for the pruned one.
pub fn pvar_grid_dp_unpruned(values: &[f64], dim: usize, p: f64) -> Result<PvarResult> {
    check_exponent("p", p)?;
    let n = check_points(values, dim)?;
    let (v, prev) = chain_dp(n, p, |i, j| dist(point(values, dim, i), point(values, dim, j)), None);
    Ok(PvarResult {
        value: v[n - 1].powf(1.0 / p),
        optimal_partition: backtrack(&prev, n - 1),
        method: PvarMethod::DpExact,
    })
}

/// Exhaustive maximum over all `2^{n−2}` partitions containing both ends.
fn brute_force_with(n: usize, p: f64, incr: impl Fn(usize, usize) -> f64) -> Result<PvarResult> {
    if n > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::TooManyPoints { points: n, max: BRUTE_FORCE_MAX_POINTS });
    }
    if n == 1 {
        return Ok(PvarResult { value: 0.0, optimal_partition: vec![0], method: PvarMethod::BruteForce });
    }
    let interior = n - 2;
    let mut best = f64::NEG_INFINITY;
    let mut best_part = Vec::new();
    let mut part = Vec::with_capacity(n);
    for mask in 0u32..(1u32 << interior) {
        part.clear();
        part.push(0);
        for b in 0..interior {
            if mask & (1 << b) != 0 {
                part.push(b + 1);
            }
        }
        part.push(n - 1);
        let s = partition_sum(&part, p, &incr);
        if s > best {
            best = s;
            best_part.clone_from(&part);
        }
    }
    Ok(PvarResult { value: best.powf(1.0 / p), optimal_partition: best_part, method: PvarMethod::BruteForce })
}

/// Oracle: p-variation over grid partitions by exhaustive enumeration.
pub fn pvar_bruteforce(values: &[f64], dim: usize, p: f64) -> Result<PvarResult> {
    check_exponent("p", p)?;
    let n = check_points(values, dim)?;
    brute_force_with(n, p, |i, j| dist(point(values, dim, i), point(values, dim, j)))
}

/// `q`-variation of the area process `(s,t) ↦ 𝕏_{s,t}` over grid partitions,
/// with the Frobenius norm. The functional is not additive, so the program
/// maximizes over all chains exactly as the definition asks.
pub fn pvar_area(lift: &Level2Lift, q: f64) -> Result<PvarResult> {
    check_exponent("q", q)?;
    let n = lift.len();
    if n == 0 {
        return Err(Error::InvalidPath("empty lift".into()));
    }
    let (v, prev) = chain_dp(n, q, |i, j| lift.area_norm(i, j), None);
    Ok(PvarResult {
        value: v[n - 1].powf(1.0 / q),
        optimal_partition: backtrack(&prev, n - 1),
        method: PvarMethod::DpExact,
    })
}

/// Exhaustive oracle for [`pvar_area`].
pub fn pvar_area_bruteforce(lift: &Level2Lift, q: f64) -> Result<PvarResult> {
    check_exponent("q", q)?;
    brute_force_with(lift.len(), q, |i, j| lift.area_norm(i, j))
}

/// `|X_0| + ‖X‖_p + ‖𝕏‖_{p/2}^{1/2}` on the lift's grid.
pub fn rough_norm(lift: &Level2Lift, p: f64) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::param("p", format!("rough-path exponent must be >= 2, got {p}")));
    }
    let x0 = lift.value(0).iter().map(|x| x * x).sum::<f64>().sqrt();
    let level1 = pvar_grid_dp(lift.values_flat(), lift.dim(), p)?.value;
    let level2 = pvar_area(lift, p / 2.0)?.value;
    Ok(x0 + level1 + level2.sqrt())
}

/// Vertices on which the p-variation of a path is attained.
pub trait Vertices {
    fn dim(&self) -> usize;
    fn vertex_values(&self) -> Vec<f64>;
}

impl Vertices for SampledPath {
    fn dim(&self) -> usize {
        SampledPath::dim(self)
    }
    fn vertex_values(&self) -> Vec<f64> {
        self.values_flat().to_vec()
    }
}

impl Vertices for JumpPath {
    fn dim(&self) -> usize {
        JumpPath::dim(self)
    }
    fn vertex_values(&self) -> Vec<f64> {
        self.event_values()
    }
}

/// Exact p-variation of a piecewise-linear or step path.
pub fn pvar_path<P: Vertices>(path: &P, p: f64) -> Result<PvarResult> {
    pvar_grid_dp(&path.vertex_values(), path.dim(), p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlEvaluation {
    /// `(s, u, t, c(s,u) + c(u,t) − c(s,t))`.
    pub superadditivity_defects: Vec<(f64, f64, f64, f64)>,
    pub max_defect: f64,
}

impl ControlEvaluation {
    /// Largest defect divided by the largest value of `c` seen.
    pub fn max_relative_defect(&self, scale: f64) -> f64 {
        if scale > 0.0 {
            self.max_defect / scale
        } else {
            self.max_defect
        }
    }
}

/// Evaluates the superadditivity defect of `c` on grid triples. All
/// triples are visited when there are at most `max_triples` of them;
/// otherwise `max_triples` triples are drawn deterministically from `seed`.
pub fn control_check(
    times: &[f64],
    c: impl Fn(usize, usize) -> f64,
    max_triples: usize,
    seed: u64,
) -> Result<ControlEvaluation> {
    let n = times.len();
    if n < 3 {
        return Err(Error::InvalidPath("control check needs at least 3 grid points".into()));
    }
    let total = n * (n - 1) * (n - 2) / 6;
    let mut defects = Vec::new();
    let mut push = |i: usize, k: usize, j: usize| {
        let d = c(i, k) + c(k, j) - c(i, j);
        defects.push((times[i], times[k], times[j], d));
    };
    if total <= max_triples {
        for i in 0..n {
            for k in i + 1..n {
                for j in k + 1..n {
                    push(i, k, j);
                }
            }
        }
    } else {
        for s in 0..max_triples as u64 {
            let mut idx = [0usize; 3];
            let mut h = hash_words(&[seed, s]);
            loop {
                for slot in idx.iter_mut() {
                    h = mix64(h);
                    *slot = (h % n as u64) as usize;
                }
                idx.sort_unstable();
                if idx[0] < idx[1] && idx[1] < idx[2] {
                    break;
                }
            }
            push(idx[0], idx[1], idx[2]);
        }
    }
    let max_defect = defects.iter().map(|d| d.3).fold(f64::NEG_INFINITY, f64::max);
    Ok(ControlEvaluation { superadditivity_defects: defects, max_defect })
}

/// Table `c[i][j] = ‖X‖_{p,[t_i,t_j]}^p` for all grid pairs.
pub fn pvar_control_table(values: &[f64], dim: usize, p: f64) -> Result<Vec<Vec<f64>>> {
    check_exponent("p", p)?;
    let n = check_points(values, dim)?;
    let mut table = vec![vec![0.0; n]; n];
    for (i, row) in table.iter_mut().enumerate() {
        let tail = &values[i * dim..];
        let (v, _) = chain_dp(n - i, p, |a, b| dist(point(tail, dim, a), point(tail, dim, b)), None);
        row[i..].copy_from_slice(&v);
    }
    Ok(table)
}

/// `[M]_T = Σ |ΔM|²` for a pure-jump path.
pub fn jump_quadratic_variation(path: &JumpPath) -> f64 {
    path.increments_flat().iter().map(|x| x * x).sum()
}

/// `‖M‖²_{p,[0,T]} / [M]_T` for one trajectory of a pure-jump martingale.
pub fn lepingle_ratio(path: &JumpPath, p: f64) -> Result<f64> {
    let qv = jump_quadratic_variation(path);
    lepingle_ratio_vertices(&path.event_values(), path.dim(), p, qv)
}

/// Same ratio for a path given by its p-variation vertices (e.g. a
/// compensated jump martingale with linear drift segments) and its
/// quadratic variation.
pub fn lepingle_ratio_vertices(values: &[f64], dim: usize, p: f64, quadratic_variation: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::param("p", format!("the ratio needs p > 2, got {p}")));
    }
    if !(quadratic_variation > 0.0) {
        return Err(Error::ZeroQuadraticVariation);
    }
    let v = pvar_grid_dp(values, dim, p)?.value;
    Ok(v * v / quadratic_variation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_path::{ito_lift_jump, strato_lift_linear, Interpretation};

    #[test]
    fn monotone_path_gives_total_increment() {
        let r = pvar_grid_dp(&[0.0, 1.0, 3.0], 1, 2.0).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.optimal_partition, vec![0, 2]);
    }

    #[test]
    fn zigzag_keeps_middle_point() {
        let r = pvar_grid_dp(&[0.0, 1.0, 0.0], 1, 2.0).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.optimal_partition, vec![0, 1, 2]);
        let b = pvar_bruteforce(&[0.0, 1.0, 0.0], 1, 3.0).unwrap();
        assert!((b.value - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn one_variation_is_total_variation() {
        let vals: [f64; 6] = [0.0, 0.5, -1.0, 2.0, 1.5, 1.7];
        let tv: f64 = vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        assert!((pvar_grid_dp(&vals, 1, 1.0).unwrap().value - tv).abs() < 1e-14);
    }

    #[test]
    fn single_increment() {
        assert_eq!(pvar_bruteforce(&[0.0, 0.0, 3.0, 4.0], 2, 2.5).unwrap().value, 5.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(pvar_grid_dp(&[0.0, 1.0], 1, 0.5).is_err());
        assert!(pvar_grid_dp(&[], 1, 2.0).is_err());
        assert!(matches!(pvar_bruteforce(&[0.0; 21], 1, 2.0), Err(Error::TooManyPoints { .. })));
        let s = SampledPath::uniform(1, 1.0, vec![0.0, 1.0], Interpretation::PiecewiseLinear).unwrap();
        assert!(pvar_area(&strato_lift_linear(&s), 0.9).is_err());
        assert!(rough_norm(&strato_lift_linear(&s), 1.5).is_err());
    }

    #[test]
    fn area_zigzag() {
        let s = SampledPath::uniform(1, 1.0, vec![0.0, 1.0, 0.0], Interpretation::PiecewiseLinear).unwrap();
        let l = strato_lift_linear(&s);
        let r = pvar_area(&l, 1.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert_eq!(r.value, pvar_area_bruteforce(&l, 1.0).unwrap().value);
    }

    #[test]
    fn area_of_zero_process() {
        let s = SampledPath::uniform(2, 1.0, vec![0.0; 8], Interpretation::PiecewiseLinear).unwrap();
        assert_eq!(pvar_area(&strato_lift_linear(&s), 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn rough_norm_examples() {
        let zero = SampledPath::uniform(2, 1.0, vec![0.0; 6], Interpretation::PiecewiseLinear).unwrap();
        assert_eq!(rough_norm(&strato_lift_linear(&zero), 2.5).unwrap(), 0.0);
        let jump = JumpPath::new(vec![0.0, 0.0], vec![0.5], vec![vec![1.0, 0.0]], 1.0).unwrap();
        assert!((rough_norm(&ito_lift_jump(&jump), 2.0).unwrap() - 1.0).abs() < 1e-15);
        let line = SampledPath::uniform(1, 1.0, vec![0.0, 2.0], Interpretation::PiecewiseLinear).unwrap();
        let v = rough_norm(&strato_lift_linear(&line), 2.0).unwrap();
        assert!((v - (2.0 + 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn additive_and_superadditive_controls() {
        let times: Vec<f64> = (0..8).map(|k| k as f64 * 0.3).collect();
        let add = control_check(&times, |i, j| times[j] - times[i], 1000, 0).unwrap();
        assert!(add.max_defect.abs() < 1e-15);
        let sq = control_check(&times, |i, j| (times[j] - times[i]).powi(2), 1000, 0).unwrap();
        assert!(sq.max_defect <= 0.0);
        assert_eq!(sq.superadditivity_defects.len(), 56);
        let sampled = control_check(&times, |i, j| (times[j] - times[i]).powi(2), 10, 3).unwrap();
        assert_eq!(sampled.superadditivity_defects.len(), 10);
    }

    #[test]
    fn lepingle_examples() {
        let one = JumpPath::new(vec![0.0], vec![0.5], vec![vec![1.0]], 1.0).unwrap();
        assert_eq!(lepingle_ratio(&one, 2.5).unwrap(), 1.0);
        let k = 7;
        let stairs =
            JumpPath::new(vec![0.0], (1..=k).map(|i| i as f64 / 10.0).collect(), vec![vec![1.0]; k], 1.0).unwrap();
        assert!((lepingle_ratio(&stairs, 2.5).unwrap() - k as f64).abs() < 1e-12);
        let flat = JumpPath::new(vec![0.0], vec![], vec![], 1.0).unwrap();
        assert!(matches!(lepingle_ratio(&flat, 2.5), Err(Error::ZeroQuadraticVariation)));
    }
}
