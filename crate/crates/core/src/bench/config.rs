use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::TscConfig;
use crate::graph::{GeometryParams, ScenarioKind};
use crate::params::{CmatParameters, FlowParameters};
use crate::sim::{ArrivalModel, SimConfig};
use crate::solver::{Backend, SolveOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config at `{field}`: {message}")]
    Schema { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Cmat,
    Rc,
    Tsc,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Cmat => "cmat",
            ControllerKind::Rc => "rc",
            ControllerKind::Tsc => "tsc",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cmat" => Ok(ControllerKind::Cmat),
            "rc" => Ok(ControllerKind::Rc),
            "tsc" => Ok(ControllerKind::Tsc),
            other => Err(format!("unknown controller `{other}`, expected cmat, rc or tsc")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl BetaRange {
    /// Grid points `min + k step` up to `max`, rounded to suppress accumulation error.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| ((self.min + k as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsBlock {
    pub v_f: f64,
    pub l: f64,
    pub tau_f: f64,
    pub tau_c: f64,
    pub tau_star: f64,
    pub lambda: f64,
    pub c_max: f64,
    /// Accepted for completeness of the published parameter list; no model uses it.
    pub rho: Option<f64>,
}

impl Default for ParamsBlock {
    fn default() -> Self {
        let p = CmatParameters::default();
        ParamsBlock {
            v_f: p.flow.v_f,
            l: p.flow.l,
            tau_f: p.flow.tau_f,
            tau_c: p.flow.tau_c,
            tau_star: p.tau_star,
            lambda: p.lambda,
            c_max: p.c_max,
            rho: None,
        }
    }
}

impl ParamsBlock {
    pub fn to_params(&self) -> CmatParameters {
        CmatParameters {
            flow: FlowParameters {
                v_f: self.v_f,
                l: self.l,
                tau_f: self.tau_f,
                tau_c: self.tau_c,
            },
            tau_star: self.tau_star,
            lambda: self.lambda,
            c_max: self.c_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    Deterministic,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub horizon: f64,
    pub warmup: f64,
    pub arrivals: ArrivalKind,
    pub seed: u64,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        let c = SimConfig::default();
        SimulationBlock {
            horizon: c.horizon,
            warmup: c.warmup,
            arrivals: ArrivalKind::Deterministic,
            seed: 0,
        }
    }
}

impl SimulationBlock {
    pub fn to_config(&self) -> SimConfig {
        SimConfig {
            horizon: self.horizon,
            warmup: self.warmup,
            arrivals: match self.arrivals {
                ArrivalKind::Deterministic => ArrivalModel::Deterministic,
                ArrivalKind::Poisson => ArrivalModel::Poisson { seed: self.seed },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub backend: Backend,
    /// Branch-and-bound node budget per solve; the best schedule found is used when it binds.
    pub node_limit: Option<u64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            backend: Backend::Auto,
            node_limit: Some(5000),
        }
    }
}

impl SolverBlock {
    pub fn to_options(&self) -> SolveOptions {
        let mut o = SolveOptions::default().with_backend(self.backend);
        o.node_limit = self.node_limit;
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Stem of every output file.
    pub name: String,
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub geometry: GeometryParams,
    /// Per-class base demand (veh/h), multiplied by each β.
    pub base_demand_vph: Vec<f64>,
    pub beta: BetaRange,
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    pub controllers: Vec<ControllerKind>,
    #[serde(default)]
    pub tsc: TscConfig,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("name", "must be a non-empty file stem"));
        }
        let b = &self.beta;
        if !(b.step.is_finite() && b.step > 0.0) {
            return Err(invalid("beta.step", format!("must be positive, got {}", b.step)));
        }
        if !(b.min.is_finite() && b.min > 0.0) {
            return Err(invalid("beta.min", format!("must be positive, got {}", b.min)));
        }
        if !(b.max.is_finite() && b.max >= b.min) {
            return Err(invalid("beta.max", format!("must be at least beta.min, got {}", b.max)));
        }
        let classes = self.scenario.demand_classes();
        if self.base_demand_vph.len() != classes {
            return Err(invalid(
                "base_demand_vph",
                format!("{} expects {classes} classes, got {}", self.scenario, self.base_demand_vph.len()),
            ));
        }
        if let Some(k) = self.base_demand_vph.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(&format!("base_demand_vph[{k}]"), "must be non-negative"));
        }
        if let Err(e) = self.params.to_params().validate() {
            let field = match &e {
                crate::params::ParamError::NotPositive { name, .. } => format!("params.{name}"),
                crate::params::ParamError::CrossingNotSlower { .. } => "params.tau_c".into(),
                crate::params::ParamError::LambdaRange(_) => "params.lambda".into(),
            };
            return Err(invalid(&field, e.to_string()));
        }
        if self.params.rho.is_some() {
            log::warn!("params.rho is accepted but not used by any model");
        }
        let s = &self.simulation;
        if !(s.warmup >= 0.0 && s.horizon > s.warmup) {
            return Err(invalid("simulation.horizon", "must exceed simulation.warmup, which must be non-negative"));
        }
        if self.controllers.is_empty() {
            return Err(invalid("controllers", "at least one controller is required"));
        }
        if !(self.tsc.lost_per_phase.is_finite() && self.tsc.lost_per_phase >= 0.0) {
            return Err(invalid("tsc.lost_per_phase", "must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "t",
        "scenario": "single_conflict",
        "base_demand_vph": [1000, 1000],
        "beta": {"min": 0.1, "max": 1.0, "step": 0.1},
        "controllers": ["cmat", "rc"]
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.params.to_params(), CmatParameters::default());
        assert_eq!(c.beta.values().len(), 10);
        assert_eq!(c.beta.values()[2], 0.3);
    }

    #[test]
    fn zero_step_names_the_field() {
        let text = MINIMAL.replace("\"step\": 0.1", "\"step\": 0");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("beta.step"), "{err}");
    }

    #[test]
    fn type_errors_carry_the_path() {
        let text = MINIMAL.replace("\"max\": 1.0", "\"max\": \"high\"");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("beta.max"), "{err}");
    }
}
