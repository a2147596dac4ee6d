use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CompensatedSum;

/// Smallest sample size accepted by [`compare_laws`].
pub const MIN_SAMPLES: usize = 1000;

/// Mean and variance gaps for one coordinate, each with the standard
/// error of the difference of two independent estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateGap {
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_gap: f64,
    pub mean_stderr: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub var_gap: f64,
    pub var_stderr: f64,
}

impl CoordinateGap {
    pub fn mean_z(&self) -> f64 {
        z(self.mean_gap, self.mean_stderr)
    }

    pub fn var_z(&self) -> f64 {
        z(self.var_gap, self.var_stderr)
    }
}

fn z(gap: f64, stderr: f64) -> f64 {
    if gap == 0.0 {
        0.0
    } else if stderr == 0.0 {
        f64::INFINITY
    } else {
        gap.abs() / stderr
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawComparison {
    pub samples_a: usize,
    pub samples_b: usize,
    pub coordinates: Vec<CoordinateGap>,
}

impl LawComparison {
    /// Largest gap in units of its standard error, over means and
    /// variances of every coordinate.
    pub fn max_z(&self) -> f64 {
        self.coordinates.iter().map(|c| c.mean_z().max(c.var_z())).fold(0.0, f64::max)
    }

    /// Largest mean gap in units of its standard error.
    pub fn max_mean_z(&self) -> f64 {
        self.coordinates.iter().map(CoordinateGap::mean_z).fold(0.0, f64::max)
    }

    /// Every mean and variance gap is within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.max_z() <= k
    }

    /// Some mean or variance gap exceeds `k` standard errors.
    pub fn beyond(&self, k: f64) -> bool {
        self.max_z() > k
    }
}

struct Moments {
    mean: f64,
    var: f64,
    /// Standard error of the sample variance, from the fourth central moment.
    var_stderr: f64,
}

fn moments(samples: &[Vec<f64>], i: usize) -> Moments {
    let n = samples.len() as f64;
    let mut s = CompensatedSum::default();
    samples.iter().for_each(|x| s.add(x[i]));
    let mean = s.value() / n;
    let (mut m2, mut m4) = (CompensatedSum::default(), CompensatedSum::default());
    for x in samples {
        let c = (x[i] - mean).powi(2);
        m2.add(c);
        m4.add(c * c);
    }
    let var = m2.value() / (n - 1.0);
    let mu2 = m2.value() / n;
    let mu4 = m4.value() / n;
    Moments { mean, var, var_stderr: ((mu4 - mu2 * mu2).max(0.0) / n).sqrt() }
}

/// Compares two samples of an `e`-dimensional law coordinate by coordinate.
pub fn compare_laws(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<LawComparison> {
    for (name, s) in [("samples_a", a), ("samples_b", b)] {
        if s.len() < MIN_SAMPLES {
            return Err(Error::param(name, format!("need at least {MIN_SAMPLES} samples, got {}", s.len())));
        }
    }
    let e = a[0].len();
    if a.iter().chain(b).any(|x| x.len() != e) {
        return Err(Error::Dimension(format!("every sample must have {e} coordinates")));
    }
    let coordinates = (0..e)
        .map(|i| {
            let (ma, mb) = (moments(a, i), moments(b, i));
            CoordinateGap {
                mean_a: ma.mean,
                mean_b: mb.mean,
                mean_gap: ma.mean - mb.mean,
                mean_stderr: (ma.var / a.len() as f64 + mb.var / b.len() as f64).sqrt(),
                var_a: ma.var,
                var_b: mb.var,
                var_gap: ma.var - mb.var,
                var_stderr: ma.var_stderr.hypot(mb.var_stderr),
            }
        })
        .collect();
    Ok(LawComparison { samples_a: a.len(), samples_b: b.len(), coordinates })
}
