//! Experiment configuration: a model config plus the estimator knobs of
//! each command. Command-line flags override the file.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use roughwalk::mc::SweepStatistic;
use roughwalk::models::ModelConfig;
use roughwalk::rde::VectorField;
use roughwalk::variation::PvarMethod;
use roughwalk::Matrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Simulate,
    Lift,
    Pvar,
    Predict,
    Estimate,
    Sweep,
    Probe,
    Rde,
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::Simulate => "simulate",
            CommandName::Lift => "lift",
            CommandName::Pvar => "pvar",
            CommandName::Predict => "predict",
            CommandName::Estimate => "estimate",
            CommandName::Sweep => "sweep",
            CommandName::Probe => "probe",
            CommandName::Rde => "rde",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    #[serde(alias = "dp-exact")]
    Dp,
    #[serde(alias = "brute-force")]
    Brute,
    #[serde(alias = "dyadic-lower")]
    Dyadic,
}

impl From<MethodArg> for PvarMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dp => PvarMethod::DpExact,
            MethodArg::Brute => PvarMethod::BruteForce,
            MethodArg::Dyadic => PvarMethod::DyadicLower,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LiftArg {
    Ito,
    #[serde(alias = "stratonovich")]
    Strato,
}

/// How a sampled path read from CSV is interpolated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationArg {
    Linear,
    Samples,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    Tightness,
    Lepingle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Ou,
    Conductance,
    Periodic,
}

macro_rules! knobs {
    ($( $(#[$doc:meta])* $name:ident : $ty:ty ),* $(,)?) => {
        /// Everything an experiment can be configured with. Unknown keys
        /// are rejected.
        #[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct ExperimentConfig {
            $( $(#[$doc])* #[serde(default, skip_serializing_if = "Option::is_none")] pub $name: Option<$ty>, )*
        }

        impl ExperimentConfig {
            /// Fills every knob set in `other`, keeping the rest.
            pub fn override_with(&mut self, other: ExperimentConfig) {
                $( if other.$name.is_some() { self.$name = other.$name; } )*
            }
        }
    };
}

knobs! {
    command: CommandName,
    model: ModelConfig,
    /// Monte-Carlo replicas `M`.
    replicas: usize,
    statistics: Vec<SweepStatistic>,
    /// Values of `n` for sweeps and probes.
    scales: Vec<f64>,
    p: f64,
    /// Exponents for the Lépingle probe.
    ps: Vec<f64>,
    method: MethodArg,
    /// Dyadic skeleton level.
    level: u32,
    level2: bool,
    path: PathBuf,
    interpolation: InterpolationArg,
    lift: LiftArg,
    replica: u64,
    /// Spectral cutoff `K`.
    cutoff: usize,
    max_cutoff: usize,
    mesh: f64,
    probe: ProbeKind,
    sigma: VectorField,
    y0: Vec<f64>,
    /// Euler–Maruyama step of the limit equation.
    limit_step: f64,
    /// Covariance used when no closed form is available.
    covariance: Matrix,
}

impl ExperimentConfig {
    pub fn require_model(&self, command: &str) -> CliResult<&ModelConfig> {
        self.model.as_ref().ok_or_else(|| CliError::missing("model", command))
    }

    /// Checks the knobs against the preconditions of the modules they feed.
    pub fn validate(&self) -> CliResult<()> {
        if let Some(m) = &self.model {
            m.validate()?;
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(CliError::validation(name, format!("must be positive and finite, got {x}")))
            }
            _ => Ok(()),
        };
        positive("limit_step", self.limit_step)?;
        positive("mesh", self.mesh)?;
        if let Some(p) = self.p {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(CliError::validation("p", format!("must be finite and >= 1, got {p}")));
            }
        }
        if let Some(ps) = &self.ps {
            if ps.is_empty() || ps.iter().any(|p| !(*p > 2.0 && p.is_finite())) {
                return Err(CliError::validation("ps", "exponents must be finite and exceed 2"));
            }
        }
        if let Some(m) = self.replicas {
            if m < 2 {
                return Err(CliError::validation("replicas", format!("need at least 2 replicas, got {m}")));
            }
        }
        if let Some(ns) = &self.scales {
            if ns.is_empty() || ns.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
                return Err(CliError::validation("scales", "values of n must be positive and finite"));
            }
            if ns.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::validation("scales", "values of n must be strictly increasing"));
            }
        }
        if let (Some(k), Some(max)) = (self.cutoff, self.max_cutoff) {
            if k > max {
                return Err(CliError::validation("cutoff", format!("{k} exceeds max_cutoff {max}")));
            }
        }
        if self.cutoff == Some(0) {
            return Err(CliError::validation("cutoff", "must be at least 1"));
        }
        if let Some(s) = &self.sigma {
            s.validate()?;
        }
        Ok(())
    }
}

/// Parses a configuration document. A bare model config (whose `model` key
/// is a string) and a run manifest (whose `config` key holds the echo) are
/// both accepted.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::validation("config", e.to_string()))?;
    if let Value::Object(map) = &value {
        if map.contains_key("tool") && map.contains_key("config") {
            value = map["config"].clone();
        } else if matches!(map.get("model"), Some(Value::String(_))) {
            value = serde_json::json!({ "model": value });
        }
    }
    serde_path_to_error::deserialize::<_, ExperimentConfig>(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let unknown = message.strip_prefix("unknown field `").and_then(|s| s.split('`').next()).map(str::to_string);
        let field = match (path.as_str(), unknown) {
            (".", Some(u)) => u,
            (".", None) => "config".to_string(),
            (p, Some(u)) if !p.ends_with(u.as_str()) => format!("{p}.{u}"),
            (p, _) => p.to_string(),
        };
        CliError::validation(field, message)
    })
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_model_config_is_wrapped() {
        let c = parse_config(r#"{"model":"ou","scale_n":200,"step":0.01}"#).unwrap();
        assert_eq!(c.model.unwrap().scale_n, 200.0);
    }

    #[test]
    fn unknown_and_mistyped_fields_are_named() {
        let e = parse_config(r#"{"replicas":10,"bogus":1}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("bogus"));
        let e = parse_config(r#"{"replicas":"ten"}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("replicas"));
        let e = parse_config(r#"{"model":{"model":"ou","scale_n":"x"}}"#).unwrap_err();
        assert!(e.field.as_deref().unwrap().starts_with("model"), "{e}");
        let e = parse_config(r#"{"model":{"model":"ou","scale_n":5,"colour":1}}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("model.colour"));
    }

    #[test]
    fn override_keeps_unset_knobs() {
        let mut base = ExperimentConfig { replicas: Some(10), p: Some(2.5), ..Default::default() };
        base.override_with(ExperimentConfig { p: Some(3.0), ..Default::default() });
        assert_eq!((base.replicas, base.p), (Some(10), Some(3.0)));
    }

    #[test]
    fn validation_names_knob() {
        let c = ExperimentConfig { scales: Some(vec![100.0, 50.0]), ..Default::default() };
        assert_eq!(c.validate().unwrap_err().field.as_deref(), Some("scales"));
    }
}
