use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homog::RoughLimitPrediction;
use crate::matrix::Matrix;
use crate::models::{simulate_conductance_walk, walk_martingale, ConductanceEnvironment, ConductanceLaw, ModelConfig};
use crate::rng::{replica_key, replica_rng, Purpose};
use crate::tensor_path::Level2Lift;
use crate::variation::{pvar_grid_dp, rough_norm};

use super::report::EstimatorReport;
use super::run::{map_replicas, run_simulator, Run, Simulator};

/// Statistic tracked by a convergence sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepStatistic {
    Covariance,
    GammaHat,
    GammaHatAntisymmetric,
    Level2Ito,
    Level2ItoAntisymmetric,
    Level2Strato,
    InterpolationGap,
    ItoCorrection,
    ItoCentered,
}

impl SweepStatistic {
    pub const ALL: [SweepStatistic; 9] = [
        SweepStatistic::Covariance,
        SweepStatistic::GammaHat,
        SweepStatistic::GammaHatAntisymmetric,
        SweepStatistic::Level2Ito,
        SweepStatistic::Level2ItoAntisymmetric,
        SweepStatistic::Level2Strato,
        SweepStatistic::InterpolationGap,
        SweepStatistic::ItoCorrection,
        SweepStatistic::ItoCentered,
    ];

    /// True for statistics defined only for jump drivers.
    pub fn jump_only(&self) -> bool {
        matches!(self, SweepStatistic::InterpolationGap)
    }

    /// Limit of the statistic at time `horizon` under `prediction`, when
    /// the prediction determines it.
    pub fn target(&self, prediction: &RoughLimitPrediction, horizon: f64) -> Option<Matrix> {
        let cov = &prediction.covariance;
        let m = match self {
            SweepStatistic::Covariance => cov.clone(),
            SweepStatistic::GammaHat => prediction.gamma_strato.clone(),
            SweepStatistic::GammaHatAntisymmetric => prediction.gamma_strato.antisymmetric_part(),
            SweepStatistic::Level2Ito | SweepStatistic::ItoCorrection => prediction.ito_correction.clone(),
            SweepStatistic::Level2ItoAntisymmetric => prediction.ito_correction.antisymmetric_part(),
            SweepStatistic::Level2Strato => &prediction.gamma_strato + &cov.scale(0.5),
            SweepStatistic::ItoCentered => &prediction.ito_correction - &cov.scale(0.5),
            SweepStatistic::InterpolationGap => prediction.interpolation_gap.clone()?,
        };
        Some(m.scale(horizon))
    }

    pub fn evaluate(&self, run: &Run) -> Result<EstimatorReport> {
        use crate::tensor_path::LiftKind;
        match self {
            SweepStatistic::Covariance => run.covariance(),
            SweepStatistic::GammaHat => run.gamma_hat(),
            SweepStatistic::GammaHatAntisymmetric => run.gamma_hat_antisymmetric(),
            SweepStatistic::Level2ItoAntisymmetric => run.ito_antisymmetric(),
            SweepStatistic::Level2Ito => run.level2_mean(LiftKind::Ito),
            SweepStatistic::Level2Strato => run.level2_mean(LiftKind::StratonovichLinear),
            SweepStatistic::InterpolationGap => run.interpolation_gap(),
            SweepStatistic::ItoCorrection => run.ito_correction(),
            SweepStatistic::ItoCentered => run.ito_centered(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scale_n: f64,
    pub report: EstimatorReport,
    /// `max |mean − target|` over entries.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSweep {
    pub statistic: SweepStatistic,
    pub points: Vec<SweepPoint>,
    pub target: Matrix,
    /// Entrywise least-squares slopes of `log|mean − target|` on `log n`.
    pub slopes: Matrix,
    /// Slope for the largest deviation.
    pub max_deviation_slope: f64,
}

/// Least-squares slope of `y` on `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn log_slope(ns: &[f64], devs: &[f64]) -> f64 {
    let tiny = f64::MIN_POSITIVE;
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = devs.iter().map(|d| d.max(tiny).ln()).collect();
    fitted_slope(&x, &y)
}

fn check_scales(ns: &[f64], min: usize) -> Result<()> {
    if ns.len() < min {
        return Err(Error::param("scales", format!("need at least {min} values of n, got {}", ns.len())));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("scales", "values of n must be strictly increasing"));
    }
    Ok(())
}

/// Estimates `statistic` at each `n` (fresh replicas per `n`, same base
/// seed) and fits deviation rates against `target`.
pub fn convergence_sweep(
    config: &ModelConfig,
    statistic: SweepStatistic,
    target: &Matrix,
    scales: &[f64],
    replicas: usize,
    workers: Option<usize>,
) -> Result<ConvergenceSweep> {
    check_scales(scales, 3)?;
    let base = Simulator::new(config)?;
    let d = base.dim();
    if target.rows() != d || target.cols() != d {
        return Err(Error::Dimension(format!("target must be {d}x{d}")));
    }
    let mut points = Vec::with_capacity(scales.len());
    for &n in scales {
        let run = run_simulator(&base.with_scale(n)?, replicas, workers)?;
        let report = statistic.evaluate(&run)?;
        let deviation = (&report.mean - target).max_abs();
        points.push(SweepPoint { scale_n: n, report, deviation });
    }
    let slopes = Matrix::from_fn(d, d, |i, j| {
        let devs: Vec<f64> = points.iter().map(|p| (p.report.mean[(i, j)] - target[(i, j)]).abs()).collect();
        log_slope(scales, &devs)
    });
    let devs: Vec<f64> = points.iter().map(|p| p.deviation).collect();
    Ok(ConvergenceSweep {
        statistic,
        points,
        target: target.clone(),
        slopes,
        max_deviation_slope: log_slope(scales, &devs),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessRow {
    pub scale_n: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessProbe {
    pub p: f64,
    pub rows: Vec<TightnessRow>,
    /// Least-squares slope of `log q90` on `log n`.
    pub slope_q90: f64,
}

impl TightnessProbe {
    /// The uniform-boundedness diagnostic: `q90` does not trend upward.
    pub fn is_flat(&self, max_slope: f64) -> bool {
        self.slope_q90 <= max_slope
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Restricts a lift to the grid points first reaching each multiple of
/// `mesh`, plus the endpoint.
pub fn restrict_to_mesh(lift: &Level2Lift, mesh: f64) -> Result<Level2Lift> {
    if !(mesh > 0.0) {
        return Err(Error::param("mesh", format!("must be positive, got {mesh}")));
    }
    let times = lift.times();
    let horizon = times[times.len() - 1];
    let steps = (horizon / mesh).round() as usize;
    let mut idx = vec![0usize];
    for k in 1..=steps {
        let target = k as f64 * mesh - 1e-9 * mesh;
        let i = times.partition_point(|&t| t < target).min(times.len() - 1);
        if i > *idx.last().expect("non-empty") {
            idx.push(i);
        }
    }
    if *idx.last().expect("non-empty") != times.len() - 1 {
        idx.push(times.len() - 1);
    }
    lift.restrict(&idx)
}

/// Quantiles of the rough-path norm of the lifted `X^n` across `n`. With
/// `mesh`, lifts are restricted to a fixed macroscopic grid before the
/// norm is taken, so all `n` are measured on the same partition family.
pub fn pvar_tightness_probe(
    config: &ModelConfig,
    p: f64,
    scales: &[f64],
    replicas: usize,
    workers: Option<usize>,
    mesh: Option<f64>,
) -> Result<TightnessProbe> {
    if !(p >= 2.0) {
        return Err(Error::param("p", format!("rough-path exponent must be >= 2, got {p}")));
    }
    if replicas < 2 {
        return Err(Error::param("replicas", format!("need at least 2 replicas, got {replicas}")));
    }
    check_scales(scales, 2)?;
    let base = Simulator::new(config)?;
    let mut rows = Vec::with_capacity(scales.len());
    for &n in scales {
        let sim = base.with_scale(n)?;
        let mut norms = map_replicas(replicas, workers, |r| {
            let lift = sim.replica(r)?.natural_lift();
            let lift = match mesh {
                Some(m) => restrict_to_mesh(&lift, m)?,
                None => lift,
            };
            rough_norm(&lift, p)
        })?;
        norms.sort_by(f64::total_cmp);
        rows.push(TightnessRow {
            scale_n: n,
            q50: quantile(&norms, 0.5),
            q90: quantile(&norms, 0.9),
            q99: quantile(&norms, 0.99),
            replicas,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.scale_n.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.q90.ln()).collect();
    Ok(TightnessProbe { p, slope_q90: fitted_slope(&x, &y), rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LepingleReport {
    pub p: Vec<f64>,
    /// `Ê[‖M‖²_p]` for each `p`.
    pub mean_pvar_squared: Vec<f64>,
    /// `Ê[[M]_T]`.
    pub mean_quadratic_variation: f64,
    /// `Ê[‖M‖²_p] / Ê[[M]_T]` for each `p`.
    pub ratio: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
}

impl LepingleReport {
    /// Every ratio lies in `[lo, hi]`.
    pub fn in_band(&self, lo: f64, hi: f64) -> bool {
        self.ratio.iter().all(|r| (lo..=hi).contains(r))
    }
}

/// Lépingle-ratio diagnostic for the martingale part of the conductance
/// walk on `[0, horizon]`. With a constant law the walk is itself a
/// martingale (a symmetric ±1 walk in `d = 1`).
pub fn lepingle_diagnostic(
    law: &ConductanceLaw,
    dim: usize,
    horizon: f64,
    ps: &[f64],
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<LepingleReport> {
    if ps.iter().any(|&p| !(p > 2.0)) {
        return Err(Error::param("p", "every exponent must exceed 2"));
    }
    if replicas < 1 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    let per_replica = map_replicas(replicas, workers, |r| {
        let mut env = ConductanceEnvironment::new(*law, dim, replica_key(seed, Purpose::Environment, r))?;
        let mut rng = replica_rng(seed, Purpose::Dynamics, r);
        let walk = simulate_conductance_walk(&mut env, horizon, &mut rng)?;
        let m = walk_martingale(&mut env, &walk)?;
        let pv = ps
            .iter()
            .map(|&p| pvar_grid_dp(&m.vertices, dim, p).map(|v| v.value * v.value))
            .collect::<Result<Vec<f64>>>()?;
        Ok((pv, m.quadratic_variation))
    })?;
    let m = replicas as f64;
    let mean_qv = per_replica.iter().map(|(_, q)| q).sum::<f64>() / m;
    if !(mean_qv > 0.0) {
        return Err(Error::ZeroQuadraticVariation);
    }
    let mean_pvar_squared: Vec<f64> =
        (0..ps.len()).map(|k| per_replica.iter().map(|(v, _)| v[k]).sum::<f64>() / m).collect();
    let ratio = mean_pvar_squared.iter().map(|v| v / mean_qv).collect();
    Ok(LepingleReport { p: ps.to_vec(), mean_pvar_squared, mean_quadratic_variation: mean_qv, ratio, replicas, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_and_quantiles() {
        let x = [0.0, 1.0, 2.0];
        assert!((fitted_slope(&x, &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.5), 3.0);
        assert!((quantile(&s, 0.9) - 4.6).abs() < 1e-15);
    }

    #[test]
    fn lepingle_ratio_decreases_in_p() {
        let law = ConductanceLaw::Constant { kappa: 0.5 };
        let r = lepingle_diagnostic(&law, 1, 100.0, &[2.5, 4.0], 50, 3, Some(1)).unwrap();
        assert!(r.ratio[1] <= r.ratio[0]);
        assert!(r.in_band(0.01, 100.0));
    }
}
