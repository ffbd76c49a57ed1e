//! The shipped calibration: per-family parameter values fitted to the
//! quoted frequencies and time constants, loaded at compile time.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::calibrate::{calibrate, CalibrationSpec, FreeParam, Observable, Target};
use crate::error::Result;
use crate::model::ScenarioConfig;
use crate::scenarios::overrides::apply_overrides;
use crate::scenarios::registry::{arch_unit, oscillator, swimmer, Family};

const SHIPPED: &str = include_str!("calibrated.json");

/// Evaluation budget of the shipped calibration run.
pub const SHIPPED_BUDGET: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedParam {
    pub family: Family,
    pub path: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShippedCalibration {
    pub schema: u32,
    pub parameters: Vec<CalibratedParam>,
    /// Relative residual per target at the fitted values.
    pub residuals: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluations: usize,
}

impl ShippedCalibration {
    /// The in-repo parameter file.
    pub fn shipped() -> Self {
        serde_json::from_str(SHIPPED).expect("calibrated.json parses")
    }

    /// Uncalibrated defaults: no overrides.
    pub fn identity() -> Self {
        Self {
            schema: 1,
            parameters: Vec::new(),
            residuals: Vec::new(),
            objective: 0.0,
            initial_objective: 0.0,
            evaluations: 0,
        }
    }

    /// Applies every parameter of `family` to `config`.
    pub fn apply(&self, family: Family, config: &ScenarioConfig) -> ScenarioConfig {
        let overrides: Vec<_> = self
            .parameters
            .iter()
            .filter(|p| p.family == family)
            .map(|p| (p.path.clone(), json!(p.value)))
            .collect();
        apply_overrides(config, &overrides).expect("calibrated paths exist")
    }
}

/// Targets: the arch kinetic time constant (10 s), the oscillator frequency
/// at 160 mW/cm² (3.8 Hz) and the swimmer frequency mid-ladder (8 Hz), each
/// with its own free parameter.
pub fn shipped_spec() -> (CalibrationSpec, Vec<Family>) {
    let identity = ShippedCalibration::identity();
    let mut arch = arch_unit(&identity);
    arch.set_fuel_intensity(120.0);
    let mut osc = oscillator(&identity);
    osc.set_fuel_intensity(160.0);
    let mut swim = swimmer(&identity);
    swim.set_fuel_intensity(180.0);
    let target = |config, observable, value| Target {
        config,
        observable,
        value,
        weight: 1.0,
    };
    let free = |path: &str, lower, upper, t| FreeParam {
        path: path.into(),
        lower,
        upper,
        targets: Some(vec![t]),
    };
    let spec = CalibrationSpec {
        free: vec![
            free("material.heat_capacity", 1e-3, 6e-3, 0),
            free("material.joint_stiffness", 1e-6, 4e-6, 1),
            free("material.joint_stiffness", 5e-6, 1.4e-5, 2),
        ],
        targets: vec![
            target(arch, Observable::KineticTau, 10.0),
            target(osc, Observable::OscillationFrequency, 3.8),
            target(swim, Observable::OscillationFrequency, 8.0),
        ],
        max_evaluations: SHIPPED_BUDGET,
    };
    (spec, vec![Family::Arch, Family::Oscillator, Family::Swimmer])
}

/// Runs the shipped calibration from the uncalibrated defaults.
pub fn run_shipped_calibration(max_evaluations: usize) -> Result<ShippedCalibration> {
    let (spec, families) = shipped_spec();
    let r = calibrate(&spec.free, &spec.targets, max_evaluations)?;
    Ok(ShippedCalibration {
        schema: 1,
        parameters: r
            .parameters
            .iter()
            .zip(&families)
            .map(|((path, value), family)| CalibratedParam {
                family: *family,
                path: path.clone(),
                value: *value,
            })
            .collect(),
        residuals: r.residuals,
        objective: r.objective,
        initial_objective: r.initial_objective,
        evaluations: r.evaluations,
    })
}
