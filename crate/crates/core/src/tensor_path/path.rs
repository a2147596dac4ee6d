use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CompensatedSum;

/// Relative slack when comparing a requested horizon against a path's.
const HORIZON_SLACK: f64 = 1e-12;

/// How a [`SampledPath`] is read between its grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpretation {
    PiecewiseLinear,
    GridSamples,
}

/// Càdlàg piecewise-constant path stored as a start value plus jumps.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpPath {
    dim: usize,
    start: Vec<f64>,
    times: Vec<f64>,
    /// Row-major `times.len() × dim`.
    increments: Vec<f64>,
    horizon: f64,
}

impl JumpPath {
    pub fn new(start: Vec<f64>, times: Vec<f64>, increments: Vec<Vec<f64>>, horizon: f64) -> Result<Self> {
        let dim = start.len();
        if increments.len() != times.len() {
            return Err(Error::InvalidPath(format!("{} jump times but {} increments", times.len(), increments.len())));
        }
        let mut flat = Vec::with_capacity(times.len() * dim);
        for inc in &increments {
            if inc.len() != dim {
                return Err(Error::Dimension(format!("increment of length {} in dimension {dim}", inc.len())));
            }
            flat.extend_from_slice(inc);
        }
        Self::from_flat(start, times, flat, horizon)
    }

    /// Same as [`JumpPath::new`] with increments already flattened row-major.
    pub fn from_flat(start: Vec<f64>, times: Vec<f64>, increments: Vec<f64>, horizon: f64) -> Result<Self> {
        let dim = start.len();
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidPath(format!("horizon must be positive, got {horizon}")));
        }
        if increments.len() != times.len() * dim {
            return Err(Error::Dimension(format!(
                "{} increment entries for {} jumps in dimension {dim}",
                increments.len(),
                times.len()
            )));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !(t > prev) {
                return Err(Error::InvalidPath(format!(
                    "jump times must be strictly increasing and positive ({t} after {prev})"
                )));
            }
            prev = t;
        }
        if prev > horizon {
            return Err(Error::InvalidPath(format!("jump at {prev} beyond horizon {horizon}")));
        }
        if start.iter().chain(&increments).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        Ok(Self { dim, start, times, increments, horizon })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_jumps(&self) -> usize {
        self.times.len()
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    pub fn increments_flat(&self) -> &[f64] {
        &self.increments
    }

    /// Number of jumps with time `<= t`.
    fn jumps_up_to(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    fn sum_first(&self, count: usize) -> Vec<f64> {
        let mut acc: Vec<CompensatedSum> = self
            .start
            .iter()
            .map(|&x| {
                let mut c = CompensatedSum::default();
                c.add(x);
                c
            })
            .collect();
        for k in 0..count {
            for (a, dx) in acc.iter_mut().zip(self.increment(k)) {
                a.add(*dx);
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }

    /// `X_t`, including the jump at `t` if there is one.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        self.sum_first(self.jumps_up_to(t))
    }

    /// `X_{t−}`, excluding a jump at `t`.
    pub fn left_limit(&self, t: f64) -> Vec<f64> {
        self.sum_first(self.times.partition_point(|&s| s < t))
    }

    /// Event grid `0, t_1, …, t_n` followed by the horizon when it is not
    /// itself a jump time.
    pub fn event_times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.times.len() + 2);
        out.push(0.0);
        out.extend_from_slice(&self.times);
        if self.times.last().is_none_or(|&t| t < self.horizon) {
            out.push(self.horizon);
        }
        out
    }

    /// Values on [`JumpPath::event_times`], row-major.
    pub fn event_values(&self) -> Vec<f64> {
        let n = self.times.len();
        let mut out = Vec::with_capacity((n + 2) * self.dim);
        let mut acc: Vec<CompensatedSum> = self
            .start
            .iter()
            .map(|&x| {
                let mut c = CompensatedSum::default();
                c.add(x);
                c
            })
            .collect();
        out.extend(acc.iter().map(CompensatedSum::value));
        for k in 0..n {
            for (a, dx) in acc.iter_mut().zip(self.increment(k)) {
                a.add(*dx);
            }
            out.extend(acc.iter().map(CompensatedSum::value));
        }
        if self.times.last().is_none_or(|&t| t < self.horizon) {
            out.extend(acc.iter().map(CompensatedSum::value));
        }
        out
    }

    /// Piecewise-linear path through `(0, X_0)`, `(σ_k, X_{σ_k})` and
    /// `(T, X_T)`: the jumps are connected by straight segments and the path
    /// stays flat after the last jump.
    pub fn linear_interpolation(&self) -> SampledPath {
        SampledPath {
            dim: self.dim,
            times: self.event_times(),
            values: self.event_values(),
            interpretation: Interpretation::PiecewiseLinear,
        }
    }

    /// Restriction to `[0, horizon]`.
    pub fn truncate(&self, horizon: f64) -> Result<JumpPath> {
        if horizon > self.horizon * (1.0 + HORIZON_SLACK) {
            return Err(Error::HorizonTooShort { horizon: self.horizon, required: horizon });
        }
        let keep = self.jumps_up_to(horizon);
        JumpPath::from_flat(
            self.start.clone(),
            self.times[..keep].to_vec(),
            self.increments[..keep * self.dim].to_vec(),
            horizon,
        )
    }
}

/// Path sampled on a strictly increasing grid starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    dim: usize,
    times: Vec<f64>,
    /// Row-major `times.len() × dim`.
    values: Vec<f64>,
    interpretation: Interpretation,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, interpretation: Interpretation) -> Result<Self> {
        let dim = values.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(values.len() * dim);
        for v in &values {
            if v.len() != dim {
                return Err(Error::Dimension("ragged sample values".into()));
            }
            flat.extend_from_slice(v);
        }
        Self::from_flat(dim, times, flat, interpretation)
    }

    pub fn from_flat(dim: usize, times: Vec<f64>, values: Vec<f64>, interpretation: Interpretation) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        if times.is_empty() {
            return Err(Error::InvalidPath("a sampled path needs at least one point".into()));
        }
        if values.len() != times.len() * dim {
            return Err(Error::Dimension(format!(
                "{} values for {} grid points in dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath(format!("grid must start at 0, got {}", times[0])));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath("grid times must be strictly increasing".into()));
        }
        if values.iter().chain(&times).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        Ok(Self { dim, times, values, interpretation })
    }

    /// Builds a path on the uniform grid `k·step`, `k = 0..len`.
    pub fn uniform(dim: usize, step: f64, values: Vec<f64>, interpretation: Interpretation) -> Result<Self> {
        let len = values.len() / dim.max(1);
        let times = (0..len).map(|k| k as f64 * step).collect();
        Self::from_flat(dim, times, values, interpretation)
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

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn interpretation(&self) -> Interpretation {
        self.interpretation
    }

    pub fn with_interpretation(mut self, interpretation: Interpretation) -> Self {
        self.interpretation = interpretation;
        self
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> &[f64] {
        self.value(0)
    }

    pub fn end(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    /// Evaluation at an arbitrary time in `[0, T]` under the path's
    /// interpretation (linear interpolant or last sample at or before `t`).
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.value(0).to_vec();
        }
        let i = k - 1;
        if i + 1 >= self.len() || self.times[i] == t {
            return self.value(i).to_vec();
        }
        match self.interpretation {
            Interpretation::GridSamples => self.value(i).to_vec(),
            Interpretation::PiecewiseLinear => {
                let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
                self.value(i).iter().zip(self.value(i + 1)).map(|(a, b)| a + w * (b - a)).collect()
            }
        }
    }

    /// Keeps every `stride`-th grid point and always the last one.
    pub fn subsample(&self, stride: usize) -> SampledPath {
        let stride = stride.max(1);
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if *idx.last().expect("non-empty") != n - 1 {
            idx.push(n - 1);
        }
        SampledPath {
            dim: self.dim,
            times: idx.iter().map(|&k| self.times[k]).collect(),
            values: idx.iter().flat_map(|&k| self.value(k).iter().copied()).collect(),
            interpretation: self.interpretation,
        }
    }

    /// Restriction to `[0, horizon]`; a final point at `horizon` is added by
    /// evaluation if the grid does not contain it.
    pub fn truncate(&self, horizon: f64) -> Result<SampledPath> {
        let end = self.horizon();
        if horizon > end * (1.0 + HORIZON_SLACK) + HORIZON_SLACK {
            return Err(Error::HorizonTooShort { horizon: end, required: horizon });
        }
        let tol = horizon * HORIZON_SLACK;
        let keep = self.times.partition_point(|&s| s <= horizon + tol);
        let mut times = self.times[..keep].to_vec();
        let mut values = self.values[..keep * self.dim].to_vec();
        let last = *times.last().expect("grid starts at 0");
        if (last - horizon).abs() > tol {
            values.extend(self.value_at(horizon));
            times.push(horizon);
        }
        SampledPath::from_flat(self.dim, times, values, self.interpretation)
    }
}

/// Paths that admit the diffusive rescaling `X^n_t = n^{-1/2} X_{nt}`.
pub trait DiffusiveRescale: Sized {
    /// Rescales the path restricted to `[0, n·target_horizon]` onto
    /// `[0, target_horizon]`.
    fn diffusive_rescale(&self, n: f64, target_horizon: f64) -> Result<Self>;
}

fn check_scale(n: f64) -> Result<()> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::param("n", format!("scale must be positive and finite, got {n}")));
    }
    Ok(())
}

impl DiffusiveRescale for JumpPath {
    fn diffusive_rescale(&self, n: f64, target_horizon: f64) -> Result<Self> {
        check_scale(n)?;
        let micro = self.truncate(n * target_horizon)?;
        let amp = n.powf(-0.5);
        JumpPath::from_flat(
            micro.start.iter().map(|x| x * amp).collect(),
            micro.times.iter().map(|t| t / n).collect(),
            micro.increments.iter().map(|x| x * amp).collect(),
            target_horizon,
        )
    }
}

impl DiffusiveRescale for SampledPath {
    fn diffusive_rescale(&self, n: f64, target_horizon: f64) -> Result<Self> {
        check_scale(n)?;
        let micro = self.truncate(n * target_horizon)?;
        let amp = n.powf(-0.5);
        let mut times: Vec<f64> = micro.times.iter().map(|t| t / n).collect();
        if let Some(t) = times.last_mut() {
            *t = target_horizon;
        }
        SampledPath::from_flat(self.dim, times, micro.values.iter().map(|x| x * amp).collect(), self.interpretation)
    }
}
