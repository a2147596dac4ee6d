use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{
    additive_functional, identity_observable, simulate_conductance_walk, simulate_ou, simulate_periodic_diffusion,
    ConductanceEnvironment, ModelConfig, ModelSpec, PeriodicCoefficients,
};
use crate::rng::{replica_key, replica_rng, Purpose};
use crate::tensor_path::{
    ito_lift_jump, ito_lift_sampled, strato_lift_linear, DiffusiveRescale, JumpPath, Level2Lift, LiftKind, SampledPath,
};

use super::report::EstimatorReport;

/// Runs `f(replica)` for every replica index, in parallel on `workers`
/// threads (the global pool when `None`), and returns results in index order.
pub fn map_replicas<T, F>(replicas: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let run = || (0..replicas as u64).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        None => run(),
        Some(0) => Err(Error::param("workers", "worker count must be positive")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::param("workers", e.to_string()))?
            .install(run),
    }
}

/// Rescaled macroscopic path `X^n` of one replica.
#[derive(Clone, Debug, PartialEq)]
pub enum MacroPath {
    Jump(JumpPath),
    Sampled(SampledPath),
}

impl MacroPath {
    pub fn dim(&self) -> usize {
        match self {
            MacroPath::Jump(p) => p.dim(),
            MacroPath::Sampled(p) => p.dim(),
        }
    }

    /// `X_{0,T}`.
    pub fn total_increment(&self) -> Vec<f64> {
        match self {
            MacroPath::Jump(p) => {
                let end = p.value_at(p.horizon());
                end.iter().zip(p.start()).map(|(b, a)| b - a).collect()
            }
            MacroPath::Sampled(p) => p.end().iter().zip(p.start()).map(|(b, a)| b - a).collect(),
        }
    }

    /// Left-point lift (`Ito`) or the Stratonovich lift of the linear
    /// interpolation through the path's vertices.
    pub fn lift(&self, kind: LiftKind) -> Level2Lift {
        match (self, kind) {
            (MacroPath::Jump(p), LiftKind::Ito) => ito_lift_jump(p),
            (MacroPath::Jump(p), LiftKind::StratonovichLinear) => strato_lift_linear(&p.linear_interpolation()),
            (MacroPath::Sampled(p), LiftKind::Ito) => ito_lift_sampled(p),
            (MacroPath::Sampled(p), LiftKind::StratonovichLinear) => strato_lift_linear(p),
        }
    }

    /// Lift used for norms: the jump lift for walks, the Stratonovich lift
    /// for continuous paths.
    pub fn natural_lift(&self) -> Level2Lift {
        match self {
            MacroPath::Jump(_) => self.lift(LiftKind::Ito),
            MacroPath::Sampled(_) => self.lift(LiftKind::StratonovichLinear),
        }
    }
}

/// Validated model configuration with any precomputed coefficients.
#[derive(Clone, Debug)]
pub struct Simulator {
    config: ModelConfig,
    periodic: Option<PeriodicCoefficients>,
}

impl Simulator {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let periodic = match &config.model {
            ModelSpec::Periodic { coefficients } => Some(PeriodicCoefficients::from_spec(coefficients)?),
            _ => None,
        };
        Ok(Simulator { config: config.clone(), periodic })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    /// Same model at another scale `n`.
    pub fn with_scale(&self, scale_n: f64) -> Result<Self> {
        let mut config = self.config.clone();
        config.scale_n = scale_n;
        config.validate()?;
        Ok(Simulator { config, periodic: self.periodic.clone() })
    }

    /// Macroscopic path of replica `r`; identical for identical
    /// `(config, r)`.
    pub fn replica(&self, r: u64) -> Result<MacroPath> {
        let c = &self.config;
        let (n, t) = (c.scale_n, c.horizon);
        let mut rng = replica_rng(c.seed, Purpose::Dynamics, r);
        match &c.model {
            ModelSpec::Conductance { dim, law } => {
                let mut env = ConductanceEnvironment::new(*law, *dim, replica_key(c.seed, Purpose::Environment, r))?;
                let walk = simulate_conductance_walk(&mut env, n * t, &mut rng)?;
                Ok(MacroPath::Jump(walk.diffusive_rescale(n, t)?))
            }
            ModelSpec::Ou { params } => {
                let micro = simulate_ou(params, t, n, c.step()?, &mut rng)?;
                Ok(MacroPath::Sampled(additive_functional(&micro, n, t, 2, identity_observable)?))
            }
            ModelSpec::Periodic { .. } => {
                let coeffs = self.periodic.as_ref().expect("built in new");
                let micro = simulate_periodic_diffusion(coeffs, n * t, c.step()?, &mut rng)?;
                Ok(MacroPath::Sampled(micro.diffusive_rescale(n, t)?))
            }
        }
    }
}

/// Per-replica observations at the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaRecord {
    /// `X_{0,T}`.
    pub increment: Vec<f64>,
    /// Left-point level 2 `𝕏_{0,T}`, row-major.
    pub ito: Vec<f64>,
    /// Stratonovich (interpolated) level 2 `𝕏̄_{0,T}`, row-major.
    pub strato: Vec<f64>,
    /// For jump paths: largest relative violation over all jump times of
    /// `𝕏̄ − 𝕏 = ½ Σ (ΔX)^{⊗2}`.
    pub identity_error: Option<f64>,
}

impl ReplicaRecord {
    pub fn from_path(path: &MacroPath) -> Self {
        let ito = path.lift(LiftKind::Ito);
        let strato = path.lift(LiftKind::StratonovichLinear);
        let identity_error = match path {
            MacroPath::Jump(p) => Some(interpolation_identity_error(p, &ito, &strato)),
            MacroPath::Sampled(_) => None,
        };
        ReplicaRecord {
            increment: path.total_increment(),
            ito: ito.total().as_slice().to_vec(),
            strato: strato.total().as_slice().to_vec(),
            identity_error,
        }
    }

    /// `X ⊗ X`, row-major.
    pub fn outer(&self) -> Vec<f64> {
        Matrix::outer(&self.increment, &self.increment).as_slice().to_vec()
    }
}

/// Largest `|𝕏̄_t − 𝕏_t − G_t| / (|𝕏̄_t| + |𝕏_t| + |G_t|)` over event
/// times, with `G` the running half sum of squared jumps.
pub fn interpolation_identity_error(path: &JumpPath, ito: &Level2Lift, strato: &Level2Lift) -> f64 {
    let gap = crate::tensor_path::interpolation_gap(path);
    let mut worst = 0.0_f64;
    for (k, (_, g)) in gap.iter().enumerate() {
        let a = strato.running(k);
        let b = ito.running(k);
        let diff = (&(&a - &b) - g).frobenius_norm();
        let scale = a.frobenius_norm() + b.frobenius_norm() + g.frobenius_norm();
        if diff > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

/// All replica records of one run.
#[derive(Clone, Debug)]
pub struct Run {
    pub dim: usize,
    pub scale_n: f64,
    pub seed: u64,
    pub records: Vec<ReplicaRecord>,
    pub wall_time: f64,
}

impl Run {
    /// Summarizes any per-replica `rows × cols` statistic.
    pub fn statistic(
        &self,
        name: &str,
        rows: usize,
        cols: usize,
        f: impl Fn(&ReplicaRecord) -> Vec<f64>,
    ) -> Result<EstimatorReport> {
        let samples: Vec<Vec<f64>> = self.records.iter().map(f).collect();
        let mut r = EstimatorReport::from_samples(name, rows, cols, &samples, self.scale_n, self.seed)?;
        r.wall_time = self.wall_time;
        Ok(r)
    }

    fn square(&self, name: &str, f: impl Fn(&ReplicaRecord) -> Vec<f64>) -> Result<EstimatorReport> {
        self.statistic(name, self.dim, self.dim, f)
    }

    /// Mean of `X^n_{0,1} ⊗ X^n_{0,1}`.
    pub fn covariance(&self) -> Result<EstimatorReport> {
        self.square("covariance", ReplicaRecord::outer)
    }

    /// Mean of the level-2 value `𝕏^n_{0,1}` of the chosen lift.
    pub fn level2_mean(&self, kind: LiftKind) -> Result<EstimatorReport> {
        match kind {
            LiftKind::Ito => self.square("level2-ito", |r| r.ito.clone()),
            LiftKind::StratonovichLinear => self.square("level2-strato", |r| r.strato.clone()),
        }
    }

    /// Mean of `𝕏̄ − ½ X ⊗ X`. The statistic is linear in the replica
    /// observations, so the per-replica spread gives its exact standard
    /// error and the joint covariance of the two terms is accounted for.
    pub fn gamma_hat(&self) -> Result<EstimatorReport> {
        self.square("gamma-hat", |r| half_outer_removed(&r.strato, &r.outer()))
    }

    /// Antisymmetric part of [`Self::gamma_hat`], computed per replica.
    pub fn gamma_hat_antisymmetric(&self) -> Result<EstimatorReport> {
        let d = self.dim;
        self.square("gamma-hat-antisymmetric", |r| antisym(&r.strato, d))
    }

    /// Mean of the interpolation gap `𝕏̄ − 𝕏`.
    pub fn interpolation_gap(&self) -> Result<EstimatorReport> {
        self.square("interpolation-gap", |r| r.strato.iter().zip(&r.ito).map(|(a, b)| a - b).collect())
    }

    /// The Itô correction estimate: the mean of the Itô level 2, whose
    /// Brownian part has mean zero.
    pub fn ito_correction(&self) -> Result<EstimatorReport> {
        self.square("ito-correction", |r| r.ito.clone())
    }

    /// Mean of `𝕏 − ½ X ⊗ X`, with the covariance estimated jointly from
    /// the same replicas. It converges to the Itô correction minus half
    /// the covariance.
    pub fn ito_centered(&self) -> Result<EstimatorReport> {
        self.square("ito-centered", |r| half_outer_removed(&r.ito, &r.outer()))
    }

    /// Antisymmetric part of the Itô level-2 mean, per replica.
    pub fn ito_antisymmetric(&self) -> Result<EstimatorReport> {
        let d = self.dim;
        self.square("level2-ito-antisymmetric", |r| antisym(&r.ito, d))
    }

    /// Largest per-replica interpolation-identity error (jump models).
    pub fn max_identity_error(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.identity_error).reduce(f64::max)
    }
}

fn half_outer_removed(level2: &[f64], outer: &[f64]) -> Vec<f64> {
    level2.iter().zip(outer).map(|(a, o)| a - 0.5 * o).collect()
}

fn antisym(m: &[f64], d: usize) -> Vec<f64> {
    (0..d * d).map(|ij| 0.5 * (m[ij] - m[(ij % d) * d + ij / d])).collect()
}

/// Simulates `replicas` replicas of the configured model and records the
/// horizon statistics of each.
pub fn run_replicas(config: &ModelConfig, replicas: usize, workers: Option<usize>) -> Result<Run> {
    let sim = Simulator::new(config)?;
    run_simulator(&sim, replicas, workers)
}

pub(crate) fn run_simulator(sim: &Simulator, replicas: usize, workers: Option<usize>) -> Result<Run> {
    if replicas < 2 {
        return Err(Error::param("replicas", format!("need at least 2 replicas, got {replicas}")));
    }
    let start = Instant::now();
    let records = map_replicas(replicas, workers, |r| Ok(ReplicaRecord::from_path(&sim.replica(r)?)))?;
    Ok(Run {
        dim: sim.dim(),
        scale_n: sim.config().scale_n,
        seed: sim.config().seed,
        records,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Covariance `E[X^n_{0,1} ⊗ X^n_{0,1}]`.
pub fn estimate_covariance(config: &ModelConfig, replicas: usize, workers: Option<usize>) -> Result<EstimatorReport> {
    run_replicas(config, replicas, workers)?.covariance()
}

/// Mean level-2 value of the chosen lift at the horizon.
pub fn estimate_level2_mean(
    config: &ModelConfig,
    kind: LiftKind,
    replicas: usize,
    workers: Option<usize>,
) -> Result<EstimatorReport> {
    run_replicas(config, replicas, workers)?.level2_mean(kind)
}

/// Mean Stratonovich level 2 minus half the covariance.
pub fn gamma_hat(config: &ModelConfig, replicas: usize, workers: Option<usize>) -> Result<EstimatorReport> {
    run_replicas(config, replicas, workers)?.gamma_hat()
}
