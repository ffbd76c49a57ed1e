use serde::Serialize;

use crate::analysis::barrier::bistable_pair;
use crate::dynamics::integrate::{baffle_lean, simulate};
use crate::error::{Error, FieldError, Result};
use crate::model::{IntegratorSettings, LightRole, ScenarioConfig, SystemState};
use crate::system::System;

pub const BISECTION_STEPS: usize = 10;
/// Halvings of the cap in the upward ladder that brackets the threshold.
pub const LADDER_RUNGS: usize = 6;
/// Trigger start time within each trial, s.
pub const TRIGGER_START: f64 = 0.0;

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    /// Fuel intensity, mW/cm².
    pub fuel: f64,
    /// Trigger duration, s.
    pub duration: f64,
    /// Smallest switching trigger intensity found, mW/cm²; `None` when even
    /// the cap does not switch.
    pub threshold: Option<f64>,
    pub cap: f64,
    pub above_cap: bool,
    pub trials: usize,
}

fn side(system: &System, state: &SystemState) -> f64 {
    baffle_lean(system, 0, state).signum()
}

/// Sets every trigger light of `config` to `intensity` over `[0, duration)`.
fn with_trigger(config: &ScenarioConfig, intensity: f64, duration: f64) -> ScenarioConfig {
    let mut cfg = config.clone();
    for l in cfg.lights.iter_mut().filter(|l| l.role == LightRole::Trigger) {
        l.intensity_mw_cm2 = intensity;
        l.schedule = Some(vec![[TRIGGER_START, TRIGGER_START + duration]]);
    }
    cfg
}

/// Runs one trigger pulse from `start` and reports whether the unit ends on
/// the other side within `5·τ_th` after the pulse.
pub fn trigger_switches(
    config: &ScenarioConfig,
    start: &SystemState,
    intensity: f64,
    duration: f64,
) -> Result<(bool, SystemState)> {
    let cfg = with_trigger(config, intensity, duration);
    let system = System::new(&cfg)?;
    let settings = trial_settings(&system, duration);
    let mut initial = start.clone();
    initial.time = 0.0;
    let trace = simulate(&system, &initial, &settings)?;
    let end = trace.final_state().clone();
    Ok((side(&system, &end) != side(&system, start), end))
}

fn trial_settings(system: &System, duration: f64) -> IntegratorSettings {
    let mut s = system.config().integrator.clone();
    let t_end = TRIGGER_START + duration + 5.0 * system.thermal_time();
    s.sample_stride = ((t_end / s.dt) / 50.0).ceil().max(1.0) as usize;
    s.t_end = s.sample_interval() * (t_end / s.sample_interval()).ceil();
    s
}

/// Minimal trigger intensity (mW/cm²) that flips the unit out of the stable
/// state on the negative-`x` side. The levels `cap/64, cap/32, …, cap` are
/// tried in order; the first that switches is refined by bisection against
/// the level below it. Strong pulses can overheat the strip and let it fall
/// back, so the search never starts from the cap.
pub fn switching_threshold(config: &ScenarioConfig, fuel: f64, duration: f64, cap: f64) -> Result<ThresholdResult> {
    if !config.lights.iter().any(|l| l.role == LightRole::Trigger) {
        return Err(Error::Validation(vec![FieldError {
            path: "lights".into(),
            message: "switching needs a light with role `trigger`".into(),
        }]));
    }
    let mut cfg = config.clone();
    cfg.set_fuel_intensity(fuel);
    let quiet = with_trigger(&cfg, 0.0, duration);
    let (start, _) = bistable_pair(&System::new(&quiet)?)?;
    let mut trials = 0;
    let mut lo = 0.0;
    let mut hi = None;
    for k in (0..=LADDER_RUNGS).rev() {
        let level = cap / 2f64.powi(k as i32);
        trials += 1;
        if trigger_switches(&cfg, &start, level, duration)?.0 {
            hi = Some(level);
            break;
        }
        lo = level;
    }
    let Some(mut hi) = hi else {
        return Ok(ThresholdResult {
            fuel,
            duration,
            threshold: None,
            cap,
            above_cap: true,
            trials,
        });
    };
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        trials += 1;
        if trigger_switches(&cfg, &start, mid, duration)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult {
        fuel,
        duration,
        threshold: Some(hi),
        cap,
        above_cap: false,
        trials,
    })
}
