//! Built-in scenarios, one per reproduced figure panel group.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::calibration::ShippedCalibration;
use super::{AnalysisOp, BaseConfig, Check, Property, ScenarioDescriptor};
use crate::dynamics::chain::ChainConfig;
use crate::error::{Error, Result};
use crate::model::{mw_cm2_to_w_m2, LightField, ScenarioConfig};
use crate::optics::{ReducedActuator, ReducedAreaModel, ReducedMode};

/// Parameter families shared by several scenarios; the shipped calibration
/// is keyed by family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Arch,
    Oscillator,
    Swimmer,
}

/// Response-curve grid: 12 evenly spaced fuel intensities, mW/cm².
pub fn fig1e_grid() -> Vec<f64> {
    (0..12).map(|i| 20.0 + 20.0 * i as f64).collect()
}

fn config(v: serde_json::Value) -> ScenarioConfig {
    serde_json::from_value(v).expect("built-in config deserializes")
}

/// Tip sample every ~2 ms and a step at `max_stable_dt` evaluated with the
/// joint stiffness raised to `k_cap`, so calibration can move `k` up to it.
fn oscillator_steps(cfg: &mut ScenarioConfig, k_cap: f64) {
    let mut probe = cfg.clone();
    probe.material.joint_stiffness = probe.material.joint_stiffness.max(k_cap);
    cfg.integrator.dt = probe.max_stable_dt();
    cfg.integrator.sample_stride = ((0.002 / cfg.integrator.dt).round() as usize).max(1);
}

/// Horizontal cantilever with a tip baffle leaning `offset` rad off the
/// strip under a vertical beam.
fn fig1e(beta: f64, offset: f64, baffle_length: f64, opaque: bool) -> ScenarioConfig {
    config(json!({
        "geometry": {"length": 0.02, "width": 0.002, "thickness": 1e-4, "segment_count": 12},
        "material": {"heat_capacity": 7.5e-4, "heat_loss": 2e-4, "absorptance": 0.5,
            "curvature_coeff": beta, "joint_stiffness": 1e-7, "joint_damping": 1e-8,
            "linear_density": 2e-4, "ambient_temperature": 293.15},
        "baffles": [{"attach": "tip", "offset_angle": offset, "length": baffle_length,
            "width": 0.002, "opaque": opaque}],
        "lights": [{"direction": [0.0, -1.0], "intensity_mw_cm2": 100.0, "aperture": [-0.03, 0.03]}],
        "integrator": {"dt": 5e-7, "t_end": 0.01},
    }))
}

/// Pinned–roller arch with a central upright baffle, a vertical fuel beam
/// and an oblique trigger beam over the left half (off until scheduled).
pub fn arch_unit(cal: &ShippedCalibration) -> ScenarioConfig {
    let n = 12;
    let cfg = config(json!({
        "geometry": {"length": 0.02, "width": 0.002, "thickness": 1e-4, "segment_count": n,
            "base_support": "pinned", "tip_support": {"kind": "roller"}},
        "material": {"heat_capacity": 2.5e-3, "heat_loss": 2e-4, "absorptance": 0.5,
            "curvature_coeff": -24.0, "joint_stiffness": 1e-7, "joint_damping": 1e-7,
            "linear_density": 2e-4, "ambient_temperature": 293.15},
        "baffles": [{"attach": n / 2 - 1, "offset_angle": std::f64::consts::FRAC_PI_2,
            "length": 0.04, "width": 0.002}],
        "lights": [
            {"direction": [0.0, -1.0], "intensity_mw_cm2": 120.0, "aperture": [-0.03, 0.03]},
            {"direction": [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
             "intensity_mw_cm2": 0.0, "aperture": [-0.01, 0.007], "role": "trigger"}],
        "mechanics": "overdamped",
        "integrator": {"dt": 0.05, "t_end": 60.0, "sample_stride": 2},
    }));
    cal.apply(Family::Arch, &cfg)
}

/// Arch units 18 mm apart under one wide vertical beam; neighbouring
/// baffles shade each other.
pub fn arch_chain(cal: &ShippedCalibration, count: usize) -> ChainConfig {
    let mut unit = arch_unit(cal);
    unit.lights.clear();
    let light: LightField = serde_json::from_value(json!({
        "direction": [0.0, -1.0], "intensity_mw_cm2": 120.0, "aperture": [-1.0, 1.0]}))
    .expect("light deserializes");
    ChainConfig::uniform(unit, count, vec![light], 0.018)
}

fn oscillator_material(joint_stiffness: f64) -> serde_json::Value {
    json!({"heat_capacity": 8e-6, "heat_loss": 2e-4, "absorptance": 0.5,
        "curvature_coeff": 9.0, "joint_stiffness": joint_stiffness, "joint_damping": 1e-9,
        "linear_density": 4e-3, "ambient_temperature": 293.15, "drag_rate": 3.0})
}

fn cantilever_with_tip_baffle(material: serde_json::Value, intensity: f64, t_end: f64) -> ScenarioConfig {
    config(json!({
        "geometry": {"length": 0.012, "width": 0.002, "thickness": 1e-4, "segment_count": 6},
        "material": material,
        "baffles": [{"attach": "tip", "offset_angle": 1.3, "length": 0.02, "width": 0.002}],
        "lights": [{"direction": [0.0, -1.0], "intensity_mw_cm2": intensity, "aperture": [-0.03, 0.03]}],
        "integrator": {"dt": 1e-4, "t_end": t_end},
    }))
}

/// 1.2 cm self-oscillating cantilever at 160 mW/cm², 30 s.
pub fn oscillator(cal: &ShippedCalibration) -> ScenarioConfig {
    let mut cfg = cantilever_with_tip_baffle(oscillator_material(2.2e-6), 160.0, 30.0);
    oscillator_steps(&mut cfg, 4e-6);
    cal.apply(Family::Oscillator, &cfg)
}

/// The oscillator with a 0.5 m/s crosswind on `[on, off)`.
pub fn windy_oscillator(cal: &ShippedCalibration, on: f64, off: f64) -> ScenarioConfig {
    let mut cfg = oscillator(cal);
    cfg.disturbances = serde_json::from_value(json!([
        {"kind": "wind", "magnitude": 0.5, "direction": [1.0, 0.0], "schedule": [[on, off]]}]))
    .expect("wind deserializes");
    cfg
}

/// Stiffer oscillator driving a swimming body by tip thrust, 12 s.
pub fn swimmer(cal: &ShippedCalibration) -> ScenarioConfig {
    let mut cfg = cantilever_with_tip_baffle(oscillator_material(9.1e-6), 180.0, 12.0);
    cfg.body = serde_json::from_value(json!(
        {"kind": "swimmer", "body_mass": 2.3e-5, "thrust_coeff": 1e-7, "linear_drag": 2.3e-5}))
    .expect("body deserializes");
    oscillator_steps(&mut cfg, 1.4e-5);
    cal.apply(Family::Swimmer, &cfg)
}

/// Upright slow oscillator on anisotropic friction, lit from the side.
pub fn crawler() -> ScenarioConfig {
    let mut cfg = cantilever_with_tip_baffle(
        json!({"heat_capacity": 6.3e-5, "heat_loss": 2e-4, "absorptance": 0.5,
            "curvature_coeff": 2.3, "joint_stiffness": 3.56e-8, "joint_damping": 1.6e-11,
            "linear_density": 4e-3, "ambient_temperature": 293.15, "drag_rate": 0.38}),
        630.0,
        30.0,
    );
    cfg.geometry.base.angle = std::f64::consts::FRAC_PI_2;
    cfg.lights[0].direction = [1.0, 0.0];
    cfg.body = serde_json::from_value(json!({"kind": "crawler", "body_mass": 1e-4,
        "friction_forward": 0.1, "friction_backward": 0.5, "normal_load": 2e-5}))
    .expect("body deserializes");
    oscillator_steps(&mut cfg, 0.0);
    cfg
}

/// Baffle-free 1 cm² absorber whose deformation starts tilted away from the
/// beam, so it first turns face-on and then past it.
pub fn reduced(mode: ReducedMode) -> ReducedActuator {
    ReducedActuator {
        model: ReducedAreaModel::family(mode, 1e-4, 0.5),
        q0: -0.8,
        gain: 12.0,
    }
}

pub fn reduced_grid() -> Vec<f64> {
    (1..=20).map(|i| 20.0 * i as f64).collect()
}

fn below(metric: &str, value: f64) -> Property {
    Property::new(metric, Check::Below { value })
}

fn above(metric: &str, value: f64) -> Property {
    Property::new(metric, Check::Above { value })
}

fn equals(metric: &str, value: serde_json::Value) -> Property {
    Property::new(metric, Check::Equals { value })
}

fn within(metric: &str, target: f64, rel: f64) -> Property {
    Property::new(metric, Check::Within { target, rel })
}

fn single(cfg: ScenarioConfig) -> BaseConfig {
    BaseConfig::Single(Box::new(cfg))
}

fn entry(name: &str, description: &str, base: BaseConfig, pipeline: Vec<AnalysisOp>, properties: Vec<Property>) -> ScenarioDescriptor {
    ScenarioDescriptor {
        name: name.into(),
        description: description.into(),
        base,
        pipeline,
        properties,
    }
}

fn fig1e_entry(name: &str, description: &str, cfg: ScenarioConfig, properties: Vec<Property>) -> ScenarioDescriptor {
    entry(
        name,
        description,
        single(cfg),
        vec![AnalysisOp::ResponseSweep { values: fig1e_grid() }],
        properties,
    )
}

fn fig4_entry(name: &str, mode: ReducedMode) -> ScenarioDescriptor {
    entry(
        name,
        &format!("Baffle-free {} mode: self-shadowing turns positive feedback negative", mode_name(mode)),
        BaseConfig::Reduced(Box::new(reduced(mode))),
        vec![AnalysisOp::ReducedSweep {
            values: reduced_grid(),
            delta: 1.0,
        }],
        vec![
            equals("reduced_sweep.pattern", json!("positive_then_negative")),
            below("reduced_sweep.plateau_ratio", 0.35),
        ],
    )
}

fn mode_name(mode: ReducedMode) -> &'static str {
    match mode {
        ReducedMode::Bend => "bend",
        ReducedMode::Twist => "twist",
        ReducedMode::Spring => "spring",
    }
}

/// Every registered scenario, built with the shipped calibration.
pub fn list_scenarios() -> Vec<ScenarioDescriptor> {
    list_with(&ShippedCalibration::shipped())
}

/// Every registered scenario, built with `cal`.
pub fn list_with(cal: &ShippedCalibration) -> Vec<ScenarioDescriptor> {
    let arch = arch_unit(cal);
    vec![
        fig1e_entry(
            "fig1e_none",
            "Transparent tip baffle: deflection proportional to intensity",
            fig1e(3.2, 1.3, 0.03, false),
            vec![
                equals("response_sweep.class", json!("linear")),
                above("response_sweep.r_squared", 0.99),
            ],
        ),
        fig1e_entry(
            "fig1e_negative",
            "Tip baffle swings into the beam as the strip bends: saturating response",
            fig1e(3.2, 1.3, 0.03, true),
            vec![
                equals("response_sweep.class", json!("saturating")),
                below("response_sweep.slope_ratio", 0.2),
            ],
        ),
        fig1e_entry(
            "fig1e_positive",
            "Tip baffle swings out of the beam as the strip bends: superlinear response",
            fig1e(-3.2, 2.7, 0.02, true),
            vec![
                equals("response_sweep.class", json!("superlinear")),
                above("response_sweep.slope_ratio", 2.0),
            ],
        ),
        entry(
            "fig2_bistability",
            "Symmetric arch above threshold: two mirrored stable states and an unstable middle",
            single(arch.clone()),
            vec![AnalysisOp::SteadyStates],
            vec![
                equals("steady_states.stable_count", json!(2)),
                equals("steady_states.unstable_count", json!(1)),
                below("steady_states.mirror_error", 1e-9),
            ],
        ),
        entry(
            "fig2_kinetics",
            "Settling of the arch after the fuel light is switched on",
            single(arch.clone()),
            vec![AnalysisOp::KineticTau],
            vec![within("kinetic_tau.tau_s", 10.0, 0.2)],
        ),
        entry(
            "fig2_barriers",
            "Quasi-static push between the two stable states over a fuel ladder",
            single(arch.clone()),
            vec![AnalysisOp::Barriers {
                intensities: vec![96.0, 120.0, 150.0, 200.0],
            }],
            vec![
                equals("barriers.strictly_increasing", json!(true)),
                below("barriers.max_asymmetry", 0.01),
            ],
        ),
        entry(
            "fig2_switching",
            "Trigger-light switching thresholds over fuel and duration ladders",
            single(arch),
            vec![AnalysisOp::SwitchingThresholds {
                fuels: vec![80.0, 96.0, 120.0],
                fuel_ladder_duration: 10.0,
                durations: vec![5.0, 10.0, 20.0],
                duration_ladder_fuel: 120.0,
                cap: 2000.0,
                sub_threshold_fraction: 0.9,
            }],
            vec![
                equals("switching_thresholds.all_found", json!(true)),
                equals("switching_thresholds.fuel_nondecreasing", json!(true)),
                equals("switching_thresholds.duration_nonincreasing", json!(true)),
                equals("switching_thresholds.sub_threshold_reverts", json!(true)),
            ],
        ),
        entry(
            "fig2_chain2",
            "Two shading neighbours: one of four configurations is forbidden",
            BaseConfig::Chain(Box::new(arch_chain(cal, 2))),
            vec![AnalysisOp::EnumerateStates {
                intensity: 120.0,
                decoupled_spacing: Some(0.1),
            }],
            vec![
                equals("enumerate_states.observed_count", json!(3)),
                equals("enumerate_states.forbidden_count", json!(1)),
                equals("enumerate_states.decoupled_observed_count", json!(4)),
            ],
        ),
        entry(
            "fig2_chain3",
            "Three shading neighbours: five observed configurations",
            BaseConfig::Chain(Box::new(arch_chain(cal, 3))),
            vec![AnalysisOp::EnumerateStates {
                intensity: 120.0,
                decoupled_spacing: Some(0.1),
            }],
            vec![
                equals("enumerate_states.observed_count", json!(5)),
                equals("enumerate_states.decoupled_observed_count", json!(8)),
            ],
        ),
        entry(
            "fig3_oscillator",
            "Self-oscillating cantilever; frequency insensitive to intensity",
            single(oscillator(cal)),
            vec![AnalysisOp::Oscillation {
                intensity_factors: vec![0.5, 1.5],
                quiescent_factor: Some(0.1),
            }],
            vec![
                equals("oscillation.limit_cycle", json!(true)),
                equals("oscillation.quiescent_below_threshold", json!(true)),
                below("oscillation.f1_variation", 0.05),
                within("oscillation.f1_hz", 3.8, 0.1),
            ],
        ),
        entry(
            "fig3_wind",
            "Oscillator under a 0.5 m/s crosswind on 10-20 s",
            single(windy_oscillator(cal, 10.0, 20.0)),
            vec![AnalysisOp::Homeostasis { on: 10.0, off: 20.0 }],
            vec![
                below("homeostasis.f1_change", 0.02),
                below("homeostasis.drift", 0.15),
            ],
        ),
        entry(
            "fig3_crawler",
            "Upright oscillator walking on anisotropic friction",
            single(crawler()),
            vec![AnalysisOp::Locomotion {
                intensities: vec![550.0, 600.0, 650.0, 710.0],
                swapped_friction: true,
                symmetric_friction: true,
            }],
            vec![
                equals("locomotion.speed_strictly_increasing", json!(true)),
                equals("locomotion.swapped_reverses", json!(true)),
                below("locomotion.symmetric_drift_per_cycle", 0.01),
                above("locomotion.f1_min_hz", 0.37 * 0.7),
                below("locomotion.f1_max_hz", 0.59 * 1.3),
            ],
        ),
        entry(
            "fig3_swimmer",
            "Oscillator thrusting a floating body",
            single(swimmer(cal)),
            vec![AnalysisOp::Locomotion {
                intensities: vec![120.0, 180.0, 240.0],
                swapped_friction: false,
                symmetric_friction: false,
            }],
            vec![
                equals("locomotion.speed_strictly_increasing", json!(true)),
                below("locomotion.f1_spread", 0.1),
                within("locomotion.f1_min_hz", 8.0, 0.1),
                within("locomotion.f1_max_hz", 8.0, 0.1),
            ],
        ),
        fig4_entry("fig4_bend", ReducedMode::Bend),
        fig4_entry("fig4_twist", ReducedMode::Twist),
        fig4_entry("fig4_spring", ReducedMode::Spring),
    ]
}

pub fn descriptor(name: &str) -> Result<ScenarioDescriptor> {
    list_scenarios()
        .into_iter()
        .find(|d| d.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// `mw_cm2` converted for the reduced actuators, which work in W/m².
pub fn reduced_intensity(mw_cm2: f64) -> f64 {
    mw_cm2_to_w_m2(mw_cm2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_unique_and_configs_valid() {
        let all = list_scenarios();
        assert!(all.len() >= 15);
        let names: HashSet<_> = all.iter().map(|d| d.name.clone()).collect();
        assert_eq!(names.len(), all.len());
        for d in &all {
            d.base.validate().unwrap_or_else(|e| panic!("{}: {e}", d.name));
            assert!(!d.properties.is_empty(), "{}", d.name);
        }
    }

    #[test]
    fn chain2_enumerates() {
        assert!(descriptor("fig2_chain2").unwrap().references("enumerate_states"));
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(descriptor("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn oscillator_step_respects_bound() {
        let c = oscillator(&ShippedCalibration::shipped());
        assert!(c.integrator.dt <= c.max_stable_dt());
        let s = swimmer(&ShippedCalibration::shipped());
        assert!(s.integrator.dt <= s.max_stable_dt());
    }
}
