//! Monte-Carlo harness: replicas of a model, estimators with standard
//! errors, convergence sweeps in the scale `n`, and path-norm diagnostics.
//!
//! Replica `r` draws from its own ChaCha stream keyed by `(seed, purpose, r)`
//! and results are merged in replica order, so every report except
//! `wall_time` is bit-identical for any worker count.

mod diagnostics;
mod report;
mod run;

pub use diagnostics::{
    convergence_sweep, fitted_slope, lepingle_diagnostic, pvar_tightness_probe, quantile, restrict_to_mesh,
    ConvergenceSweep, LepingleReport, SweepPoint, SweepStatistic, TightnessProbe, TightnessRow,
};
pub use report::{write_reports_csv, EstimatorReport};
pub use run::{
    estimate_covariance, estimate_level2_mean, gamma_hat, interpolation_identity_error, map_replicas, run_replicas,
    MacroPath, ReplicaRecord, Run, Simulator,
};
