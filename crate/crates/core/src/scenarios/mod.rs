//! Registered scenarios, runs and exports.

pub mod calibration;
pub mod overrides;
pub mod registry;
pub mod run;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dynamics::chain::ChainConfig;
use crate::error::{Error, Result};
use crate::model::ScenarioConfig;
use crate::optics::ReducedActuator;

pub use registry::{descriptor, list_scenarios};
pub use run::{run_scenario, run_scenario_with, OutputFormat, RunOptions, RunSummary};

/// Default seed when neither `--seed` nor `PHOTOFEEDBACK_SEED` is given.
pub const DEFAULT_SEED: u64 = 0;
pub const SEED_ENV: &str = "PHOTOFEEDBACK_SEED";
pub const SUMMARY_SCHEMA: u32 = 1;

/// What a scenario runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseConfig {
    Single(Box<ScenarioConfig>),
    Chain(Box<ChainConfig>),
    Reduced(Box<ReducedActuator>),
}

impl BaseConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseConfig::Single(c) => crate::model::validate(c).map(|_| ()),
            BaseConfig::Chain(c) => c.system().map(|_| ()),
            BaseConfig::Reduced(r) => r.model.validate().map_err(|m| {
                Error::Validation(vec![crate::error::FieldError {
                    path: "model".into(),
                    message: m,
                }])
            }),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            BaseConfig::Single(c) => c.seed = seed,
            BaseConfig::Chain(c) => c.units.iter_mut().for_each(|u| u.seed = seed),
            BaseConfig::Reduced(_) => {}
        }
        out
    }

    /// Applies dotted-path overrides to the inner config.
    pub fn with_overrides(&self, overrides: &[(String, Value)]) -> Result<Self> {
        Ok(match self {
            BaseConfig::Single(c) => BaseConfig::Single(Box::new(overrides::apply_overrides(c.as_ref(), overrides)?)),
            BaseConfig::Chain(c) => BaseConfig::Chain(Box::new(overrides::apply_overrides(c.as_ref(), overrides)?)),
            BaseConfig::Reduced(r) => BaseConfig::Reduced(Box::new(overrides::apply_overrides(r.as_ref(), overrides)?)),
        })
    }
}

/// Hex SHA-256 of the compact JSON of `value` with object keys sorted.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_value(value)?;
    let text = serde_json::to_string(&canonical)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// One analysis step of a scenario pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AnalysisOp {
    /// Steady-state continuation over fuel intensities, then `classify_response`.
    ResponseSweep { values: Vec<f64> },
    /// Steady states at the config's fuel intensity, with the mirror check.
    SteadyStates,
    /// Settling time constant after fuel-on.
    KineticTau,
    /// `compute_barrier` over an intensity ladder.
    Barriers { intensities: Vec<f64> },
    /// `switching_threshold` over a fuel ladder and a duration ladder.
    SwitchingThresholds {
        fuels: Vec<f64>,
        fuel_ladder_duration: f64,
        durations: Vec<f64>,
        duration_ladder_fuel: f64,
        cap: f64,
        /// Fraction of the reference threshold used for the revert check.
        sub_threshold_fraction: f64,
    },
    /// `enumerate_states` at the coupled spacing and, optionally, at a
    /// decoupled control spacing.
    EnumerateStates {
        intensity: f64,
        decoupled_spacing: Option<f64>,
    },
    /// Simulate, then `oscillation_metrics` and `spectrum`; repeated with the
    /// fuel scaled by each factor, and once at `quiescent_factor` where no
    /// limit cycle is expected.
    Oscillation {
        intensity_factors: Vec<f64>,
        quiescent_factor: Option<f64>,
    },
    /// `homeostasis_report` around a disturbance active on `[on, off)`.
    Homeostasis { on: f64, off: f64 },
    /// Net body speed over a fuel ladder, plus friction controls (crawler).
    Locomotion {
        intensities: Vec<f64>,
        swapped_friction: bool,
        symmetric_friction: bool,
    },
    /// Reduced 1-DOF sweep with the feedback sign at every point.
    ReducedSweep { values: Vec<f64>, delta: f64 },
}

impl AnalysisOp {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisOp::ResponseSweep { .. } => "response_sweep",
            AnalysisOp::SteadyStates => "steady_states",
            AnalysisOp::KineticTau => "kinetic_tau",
            AnalysisOp::Barriers { .. } => "barriers",
            AnalysisOp::SwitchingThresholds { .. } => "switching_thresholds",
            AnalysisOp::EnumerateStates { .. } => "enumerate_states",
            AnalysisOp::Oscillation { .. } => "oscillation",
            AnalysisOp::Homeostasis { .. } => "homeostasis",
            AnalysisOp::Locomotion { .. } => "locomotion",
            AnalysisOp::ReducedSweep { .. } => "reduced_sweep",
        }
    }
}

/// Assertion on one output metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    Equals { value: Value },
    Below { value: f64 },
    Above { value: f64 },
    /// `|observed/target − 1| ≤ rel`.
    Within { target: f64, rel: f64 },
}

impl Check {
    pub fn holds(&self, observed: &Value) -> bool {
        match self {
            Check::Equals { value } => observed == value,
            Check::Below { value } => observed.as_f64().is_some_and(|v| v < *value),
            Check::Above { value } => observed.as_f64().is_some_and(|v| v > *value),
            Check::Within { target, rel } => observed
                .as_f64()
                .is_some_and(|v| (v / target - 1.0).abs() <= *rel),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub metric: String,
    #[serde(flatten)]
    pub check: Check,
}

impl Property {
    pub fn new(metric: &str, check: Check) -> Self {
        Self {
            metric: metric.into(),
            check,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDescriptor {
    pub name: String,
    pub description: String,
    pub base: BaseConfig,
    pub pipeline: Vec<AnalysisOp>,
    pub properties: Vec<Property>,
}

impl ScenarioDescriptor {
    pub fn references(&self, op: &str) -> bool {
        self.pipeline.iter().any(|p| p.name() == op)
    }
}
