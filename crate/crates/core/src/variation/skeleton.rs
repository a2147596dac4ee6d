//! Dyadic skeleton: the path read off at the successive times it moves a
//! distance `2^{-level}` from the last recorded value.

use super::{pvar_grid_dp, PvarMethod, PvarResult};
use crate::error::{Error, Result};
use crate::tensor_path::{Interpretation, JumpPath, SampledPath};

/// Vertices of a path and whether it is linear between them.
pub trait SkeletonInput {
    fn dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn vertices(&self) -> (Vec<f64>, Vec<f64>, bool);
}

impl SkeletonInput for JumpPath {
    fn dim(&self) -> usize {
        JumpPath::dim(self)
    }
    fn horizon(&self) -> f64 {
        JumpPath::horizon(self)
    }
    fn vertices(&self) -> (Vec<f64>, Vec<f64>, bool) {
        (self.event_times(), self.event_values(), false)
    }
}

impl SkeletonInput for SampledPath {
    fn dim(&self) -> usize {
        SampledPath::dim(self)
    }
    fn horizon(&self) -> f64 {
        SampledPath::horizon(self)
    }
    fn vertices(&self) -> (Vec<f64>, Vec<f64>, bool) {
        let linear = self.interpretation() == Interpretation::PiecewiseLinear;
        (self.times().to_vec(), self.values_flat().to_vec(), linear)
    }
}

struct Recorder {
    dim: usize,
    times: Vec<f64>,
    increments: Vec<f64>,
    anchor: Vec<f64>,
}

impl Recorder {
    fn record(&mut self, t: f64, value: &[f64]) {
        let merge = self.times.last().is_some_and(|&last| t <= last) || t <= 0.0;
        if !merge {
            self.times.push(t);
            self.increments.extend(std::iter::repeat_n(0.0, self.dim));
        }
        if self.times.is_empty() {
            // A crossing that rounds to time zero moves the start instead.
            return;
        }
        let off = self.increments.len() - self.dim;
        for (i, (a, v)) in self.anchor.iter_mut().zip(value).enumerate() {
            self.increments[off + i] += v - *a;
            *a = *v;
        }
    }
}

/// Stopping-time skeleton of `path` at threshold `2^{-level}`.
///
/// The result `Y^n` satisfies `|Y_t − Y^n_t| ≤ 2^{-level}` at every time.
pub fn dyadic_skeleton<P: SkeletonInput>(path: &P, level: u32) -> Result<JumpPath> {
    if level > 60 {
        return Err(Error::param("level", format!("dyadic level must be <= 60, got {level}")));
    }
    let thr = (-(level as f64)).exp2();
    let dim = path.dim();
    let (times, values, linear) = path.vertices();
    let start = values[..dim].to_vec();
    let mut rec = Recorder { dim, times: Vec::new(), increments: Vec::new(), anchor: start.clone() };
    let mut w = vec![0.0; dim];
    let mut delta = vec![0.0; dim];
    let mut point = vec![0.0; dim];
    for k in 1..times.len() {
        let a = &values[(k - 1) * dim..k * dim];
        let b = &values[k * dim..(k + 1) * dim];
        if !linear {
            if dist2(b, &rec.anchor) >= thr * thr {
                rec.record(times[k], b);
            }
            continue;
        }
        for i in 0..dim {
            delta[i] = b[i] - a[i];
        }
        let dd: f64 = delta.iter().map(|x| x * x).sum();
        if dd == 0.0 {
            continue;
        }
        loop {
            for i in 0..dim {
                w[i] = a[i] - rec.anchor[i];
            }
            let wd: f64 = w.iter().zip(&delta).map(|(x, y)| x * y).sum();
            let ww: f64 = w.iter().map(|x| x * x).sum();
            let disc = wd * wd - dd * (ww - thr * thr);
            let s = (-wd + disc.max(0.0).sqrt()) / dd;
            if s > 1.0 {
                break;
            }
            for i in 0..dim {
                point[i] = a[i] + s * delta[i];
            }
            let t = times[k - 1] + s * (times[k] - times[k - 1]);
            rec.record(t.min(times[k]), &point);
            if s == 1.0 {
                break;
            }
        }
    }
    JumpPath::from_flat(start, rec.times, rec.increments, path.horizon())
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lower bound on the p-variation: the exact p-variation of the dyadic
/// skeleton at `level`. Its vertices are values of the path in time order,
/// so the bound never exceeds the true value, and it converges as `level`
/// grows. Partition indices refer to the skeleton's events.
pub fn pvar_dyadic_lower<P: SkeletonInput>(path: &P, level: u32, p: f64) -> Result<PvarResult> {
    let skeleton = dyadic_skeleton(path, level)?;
    let dim = skeleton.dim();
    let values = skeleton.event_values();
    let keep = corners(&values, dim);
    let reduced: Vec<f64> = keep.iter().flat_map(|&k| values[k * dim..(k + 1) * dim].iter().copied()).collect();
    let mut r = pvar_grid_dp(&reduced, dim, p)?;
    r.optimal_partition = r.optimal_partition.iter().map(|&i| keep[i]).collect();
    r.method = PvarMethod::DyadicLower;
    Ok(r)
}

/// Indices of the points that are not interior to a straight run. A point
/// on the segment between its neighbours never raises a partition sum, so
/// dropping it leaves the p-variation unchanged.
fn corners(values: &[f64], dim: usize) -> Vec<usize> {
    let n = values.len() / dim;
    let at = |k: usize| &values[k * dim..(k + 1) * dim];
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut keep = vec![0];
    for k in 1..n.saturating_sub(1) {
        let a = at(*keep.last().expect("non-empty"));
        let (b, c) = (at(k), at(k + 1));
        let through = dist(a, b) + dist(b, c);
        if through > dist(a, c) * (1.0 + 1e-12) {
            keep.push(k);
        }
    }
    if n > 1 {
        keep.push(n - 1);
    }
    keep
}
