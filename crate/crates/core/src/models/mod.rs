//! Simulators for the three model classes: the random-conductance walk on
//! `Z^d`, the non-reversible two-dimensional Ornstein-Uhlenbeck process and
//! diffusions with periodic coefficients.

mod conductance;
mod functional;
mod ou;
mod periodic;

use serde::{Deserialize, Serialize};

pub use conductance::{
    simulate_conductance_walk, walk_martingale, BondHasher, ConductanceEnvironment, ConductanceLaw, MartingalePart,
    Site, MAX_LATTICE_DIM,
};
pub use functional::{additive_functional, identity_observable};
pub use ou::{simulate_ou, OuParams};
pub use periodic::{
    simulate_periodic_diffusion, FourierMode, MatrixModeSpec, PeriodicCoefficients, PeriodicSpec, ScalarModeSpec,
};

use crate::error::{Error, Result};

/// Model and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Conductance {
        dim: usize,
        law: ConductanceLaw,
    },
    Ou {
        #[serde(default)]
        params: OuParams,
    },
    Periodic {
        coefficients: PeriodicSpec,
    },
}

fn default_horizon() -> f64 {
    1.0
}

/// Model configuration: the model, the macroscopic horizon `T`, the
/// diffusive scale `n`, the microscopic grid step (continuous models only)
/// and the base seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub scale_n: f64,
    #[serde(default)]
    pub step: Option<f64>,
}

impl ModelConfig {
    pub fn dim(&self) -> usize {
        match &self.model {
            ModelSpec::Conductance { dim, .. } => *dim,
            ModelSpec::Ou { .. } => OuParams::DIM,
            ModelSpec::Periodic { coefficients } => match coefficients {
                PeriodicSpec::Identity { dim } | PeriodicSpec::Modes { dim, .. } => *dim,
                PeriodicSpec::AntisymPerturbation { .. } => 2,
                PeriodicSpec::Scalar1d { .. } => 1,
            },
        }
    }

    /// Grid step, required for the continuous models.
    pub fn step(&self) -> Result<f64> {
        self.step.ok_or_else(|| Error::param("step", "a microscopic grid step is required for this model"))
    }

    /// Checks every knob against the simulators' preconditions.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::param("horizon", format!("must be positive and finite, got {}", self.horizon)));
        }
        if !(self.scale_n > 0.0) || !self.scale_n.is_finite() {
            return Err(Error::param("scale_n", format!("must be positive and finite, got {}", self.scale_n)));
        }
        match &self.model {
            ModelSpec::Conductance { dim, law } => {
                law.validate()?;
                if *dim == 0 || *dim > MAX_LATTICE_DIM {
                    return Err(Error::param("dim", format!("must be in 1..={MAX_LATTICE_DIM}, got {dim}")));
                }
            }
            ModelSpec::Ou { .. } => {
                ou::step_count(self.horizon * self.scale_n, self.step()?)?;
            }
            ModelSpec::Periodic { coefficients } => {
                PeriodicCoefficients::from_spec(coefficients)?;
                ou::step_count(self.horizon * self.scale_n, self.step()?)?;
            }
        }
        Ok(())
    }
}
