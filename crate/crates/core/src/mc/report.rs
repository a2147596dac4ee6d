use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CompensatedSum, Matrix};

/// Monte-Carlo estimate of a matrix-valued statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub statistic: String,
    pub mean: Matrix,
    /// Entrywise sample standard deviation over `√replicas`.
    pub stderr: Matrix,
    pub replicas: usize,
    pub scale_n: f64,
    pub seed: u64,
    pub wall_time: f64,
}

impl EstimatorReport {
    /// Summarizes per-replica samples of a `rows × cols` statistic (each
    /// sample row-major). Sums run in replica order.
    pub fn from_samples(
        statistic: impl Into<String>,
        rows: usize,
        cols: usize,
        samples: &[Vec<f64>],
        scale_n: f64,
        seed: u64,
    ) -> Result<Self> {
        let m = samples.len();
        if m < 2 {
            return Err(Error::param("replicas", format!("need at least 2 replicas, got {m}")));
        }
        let k = rows * cols;
        if samples.iter().any(|s| s.len() != k) {
            return Err(Error::Dimension(format!("samples must have {k} entries")));
        }
        let mut mean = vec![0.0; k];
        for (e, slot) in mean.iter_mut().enumerate() {
            let mut acc = CompensatedSum::default();
            samples.iter().for_each(|s| acc.add(s[e]));
            *slot = acc.value() / m as f64;
        }
        let mut stderr = vec![0.0; k];
        for (e, slot) in stderr.iter_mut().enumerate() {
            let mut acc = CompensatedSum::default();
            samples.iter().for_each(|s| acc.add((s[e] - mean[e]).powi(2)));
            *slot = (acc.value() / (m - 1) as f64 / m as f64).sqrt();
        }
        Ok(EstimatorReport {
            statistic: statistic.into(),
            mean: Matrix::from_row_major(rows, cols, mean)?,
            stderr: Matrix::from_row_major(rows, cols, stderr)?,
            replicas: m,
            scale_n,
            seed,
            wall_time: 0.0,
        })
    }

    /// Largest `|mean − target| / stderr` over entries; entries with zero
    /// stderr count as exact matches only when the gap is zero too.
    pub fn max_z_score(&self, target: &Matrix) -> f64 {
        self.mean
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .zip(self.stderr.as_slice())
            .map(|((m, t), s)| {
                let gap = (m - t).abs();
                if gap == 0.0 {
                    0.0
                } else if *s == 0.0 {
                    f64::INFINITY
                } else {
                    gap / s
                }
            })
            .fold(0.0, f64::max)
    }

    /// True when every entry is within `k` standard errors plus `allowance`
    /// of `target`.
    pub fn within(&self, target: &Matrix, k: f64, allowance: f64) -> bool {
        self.mean
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .zip(self.stderr.as_slice())
            .all(|((m, t), s)| (m - t).abs() <= k * s + allowance)
    }
}

/// Long-format CSV: `statistic,i,j,mean,stderr,n,M,seed`, indices from 1.
pub fn write_reports_csv<W: Write>(reports: &[EstimatorReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "i", "j", "mean", "stderr", "n", "M", "seed"])?;
    for r in reports {
        for i in 0..r.mean.rows() {
            for j in 0..r.mean.cols() {
                w.write_record([
                    r.statistic.clone(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    format!("{:?}", r.mean[(i, j)]),
                    format!("{:?}", r.stderr[(i, j)]),
                    format!("{:?}", r.scale_n),
                    r.replicas.to_string(),
                    r.seed.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let samples = vec![vec![1.0], vec![2.0], vec![3.0], vec![6.0]];
        let r = EstimatorReport::from_samples("x", 1, 1, &samples, 1.0, 0).unwrap();
        assert_eq!(r.mean[(0, 0)], 3.0);
        let sd = (14.0f64 / 3.0).sqrt();
        assert!((r.stderr[(0, 0)] - sd / 2.0).abs() < 1e-15);
        assert!(r.within(&Matrix::from_fn(1, 1, |_, _| 3.5), 1.0, 0.0));
        assert!(!r.within(&Matrix::from_fn(1, 1, |_, _| 6.0), 2.0, 0.0));
    }

    #[test]
    fn needs_two_replicas() {
        assert!(EstimatorReport::from_samples("x", 1, 1, &[vec![1.0]], 1.0, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = EstimatorReport::from_samples("cov", 2, 2, &vec![vec![1.0, 0.0, 0.0, 1.0]; 3], 4.0, 7).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "statistic,i,j,mean,stderr,n,M,seed");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "cov,1,2,0.0,0.0,4.0,3,7");
    }
}
