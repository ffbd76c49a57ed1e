//! Configuration schema and domain types shared by every other module.
//!
//! All quantities are SI internally. The only exception is light intensity,
//! which the schema takes in mW/cm² (1 mW/cm² = 10 W/m²) and converts on use.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

/// Density of air used for wind drag, kg/m³.
pub const AIR_DENSITY: f64 = 1.2;
/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;
pub const DEFAULT_SEGMENTS: usize = 32;

pub fn mw_cm2_to_w_m2(value: f64) -> f64 {
    value * 10.0
}

pub fn w_m2_to_mw_cm2(value: f64) -> f64 {
    value / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Heat capacity of one segment, J/K.
    pub heat_capacity: f64,
    /// Lumped convective loss of one segment, W/K.
    pub heat_loss: f64,
    /// Fraction of incident power converted to heat.
    pub absorptance: f64,
    /// Equilibrium curvature change per kelvin, 1/(m·K). Signed.
    pub curvature_coeff: f64,
    /// Joint bending stiffness, N·m/rad.
    pub joint_stiffness: f64,
    /// Joint damping, N·m·s/rad.
    pub joint_damping: f64,
    /// Mass per unit length, kg/m.
    pub linear_density: f64,
    /// Ambient temperature, K.
    pub ambient_temperature: f64,
    /// Viscous drag of the surrounding medium as a rate, 1/s: the drag
    /// force on every mass element is `−drag_rate · m · v`. Inertial only.
    #[serde(default)]
    pub drag_rate: f64,
}

impl MaterialParams {
    pub fn thermal_time_constant(&self) -> f64 {
        self.heat_capacity / self.heat_loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseSupport {
    /// Base position and tangent fixed; joint 0 couples segment 0 to the base angle.
    #[default]
    Clamped,
    /// Base position fixed, rotation free.
    Pinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TipSupport {
    #[default]
    Free,
    /// Tip held on the base axis by a transverse penalty spring (N/m).
    /// Defaults to `2·k / (L·ℓ)`.
    Roller {
        #[serde(default)]
        stiffness: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorGeometry {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    #[serde(default = "default_segments")]
    pub segment_count: usize,
    #[serde(default)]
    pub base: Pose,
    /// Per-joint rest curvature, 1/m. Filled with zeros by `validate`.
    #[serde(default)]
    pub rest_curvature: Option<Vec<f64>>,
    #[serde(default)]
    pub base_support: BaseSupport,
    #[serde(default)]
    pub tip_support: TipSupport,
}

fn default_segments() -> usize {
    DEFAULT_SEGMENTS
}

impl ActuatorGeometry {
    pub fn segment_length(&self) -> f64 {
        self.length / self.segment_count as f64
    }

    pub fn rest_curvature_at(&self, joint: usize) -> f64 {
        self.rest_curvature
            .as_ref()
            .and_then(|k| k.get(joint).copied())
            .unwrap_or(0.0)
    }

    pub fn roller_stiffness(&self, material: &MaterialParams) -> Option<f64> {
        match self.tip_support {
            TipSupport::Free => None,
            TipSupport::Roller { stiffness } => Some(stiffness.unwrap_or_else(|| {
                2.0 * material.joint_stiffness / (self.length * self.segment_length())
            })),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipTag {
    Tip,
}

/// Where a baffle is mounted: the distal end of a segment, or the actuator tip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Attach {
    Segment(usize),
    Tip(TipTag),
}

impl Attach {
    pub fn segment(&self, segment_count: usize) -> usize {
        match *self {
            Attach::Segment(i) => i,
            Attach::Tip(_) => segment_count - 1,
        }
    }
}

/// A rigid opaque flap. Its tangent follows the attachment joint: the mean of
/// the two adjacent segment angles for interior joints, the last segment's
/// angle at the tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baffle {
    pub attach: Attach,
    pub offset_angle: f64,
    pub length: f64,
    pub width: f64,
    #[serde(default = "default_true")]
    pub opaque: bool,
    #[serde(default = "default_drag_coefficient")]
    pub drag_coefficient: f64,
    #[serde(default)]
    pub mass: f64,
}

fn default_true() -> bool {
    true
}

fn default_drag_coefficient() -> f64 {
    1.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightRole {
    #[default]
    Fuel,
    Trigger,
}

/// On/off schedule. `None` means always on.
pub type Schedule = Option<Vec<[f64; 2]>>;

pub fn schedule_active(schedule: &Schedule, t: f64) -> bool {
    match schedule {
        None => true,
        Some(intervals) => intervals.iter().any(|[a, b]| t >= *a && t < *b),
    }
}

pub fn schedule_edges(schedule: &Schedule) -> Vec<f64> {
    schedule
        .iter()
        .flatten()
        .flat_map(|[a, b]| [*a, *b])
        .collect()
}

/// Uniform (top-hat) collimated beam. The transverse axis is the beam
/// direction rotated by +90°.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightField {
    pub direction: [f64; 2],
    pub intensity_mw_cm2: f64,
    pub aperture: [f64; 2],
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub role: LightRole,
}

impl LightField {
    pub fn intensity_w_m2(&self) -> f64 {
        mw_cm2_to_w_m2(self.intensity_mw_cm2)
    }

    pub fn transverse(&self) -> [f64; 2] {
        [-self.direction[1], self.direction[0]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    Wind,
    TipForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceTarget {
    #[default]
    Tip,
    BaffleTip,
    /// Force at the first baffle's tip with the opposite force at its root:
    /// a pure couple that loads neither support.
    BaffleCouple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gust {
    /// Standard deviation of the relative speed fluctuation.
    pub fraction: f64,
    /// Correlation time of the piecewise-constant gust signal, s.
    #[serde(default = "default_gust_interval")]
    pub interval: f64,
}

fn default_gust_interval() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub kind: DisturbanceKind,
    /// Wind speed (m/s) or force (N).
    pub magnitude: f64,
    pub direction: [f64; 2],
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub gust: Option<Gust>,
    /// Application point of a `tip_force`.
    #[serde(default)]
    pub target: ForceTarget,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodyCoupling {
    #[default]
    None,
    Crawler {
        body_mass: f64,
        friction_forward: f64,
        friction_backward: f64,
        normal_load: f64,
    },
    Swimmer {
        body_mass: f64,
        thrust_coeff: f64,
        linear_drag: f64,
    },
}

impl BodyCoupling {
    pub fn is_none(&self) -> bool {
        matches!(self, BodyCoupling::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanics {
    #[default]
    Inertial,
    Overdamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    #[serde(default)]
    pub method: Method,
    /// Fixed step (rk4) or maximum step (rk45), s.
    pub dt: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    pub t_end: f64,
    /// Samples are recorded every `sample_stride · dt` seconds.
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
}

fn default_rtol() -> f64 {
    1e-6
}
fn default_atol() -> f64 {
    1e-9
}
fn default_stride() -> usize {
    1
}

impl IntegratorSettings {
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_stride as f64
    }
}

/// Full experiment description for a single actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: ActuatorGeometry,
    pub material: MaterialParams,
    #[serde(default)]
    pub baffles: Vec<Baffle>,
    #[serde(default)]
    pub lights: Vec<LightField>,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    #[serde(default)]
    pub body: BodyCoupling,
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub mechanics: Mechanics,
    /// Shadow edge smoothing width, m. Defaults to L/200.
    #[serde(default)]
    pub shadow_smoothing: Option<f64>,
    #[serde(default)]
    pub gravity: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn smoothing(&self) -> f64 {
        self.shadow_smoothing
            .unwrap_or(self.geometry.length / 200.0)
    }

    /// Sum of all light intensities, W/m².
    pub fn total_intensity(&self) -> f64 {
        self.lights.iter().map(|l| l.intensity_w_m2()).sum()
    }

    /// Scales every fuel light by `factor`.
    pub fn scale_fuel(&mut self, factor: f64) {
        for light in self.lights.iter_mut().filter(|l| l.role == LightRole::Fuel) {
            light.intensity_mw_cm2 *= factor;
        }
    }

    /// Sets every fuel light to `mw_cm2`.
    pub fn set_fuel_intensity(&mut self, mw_cm2: f64) {
        for light in self.lights.iter_mut().filter(|l| l.role == LightRole::Fuel) {
            light.intensity_mw_cm2 = mw_cm2;
        }
    }

    pub fn fuel_intensity_mw_cm2(&self) -> f64 {
        self.lights
            .iter()
            .filter(|l| l.role == LightRole::Fuel)
            .map(|l| l.intensity_mw_cm2)
            .fold(0.0, f64::max)
    }

    /// Largest recommended step: `0.05 · min(2π/ω_max, τ_th)`, where `ω_max`
    /// bounds the fastest mechanical eigenvalue. For inertial mechanics that is
    /// the zigzag mode of the chain, with each link turning about its centre
    /// (`I = ρAℓ³/12`, joint stiffness and damping counted four times).
    pub fn max_stable_dt(&self) -> f64 {
        let m = &self.material;
        let ell = self.geometry.segment_length();
        let tau_th = m.thermal_time_constant();
        let mech = match self.mechanics {
            Mechanics::Inertial => {
                let inertia = m.linear_density * ell.powi(3) / 12.0;
                let omega = (4.0 * m.joint_stiffness / inertia).sqrt();
                let gamma = 4.0 * m.joint_damping / inertia;
                2.0 * std::f64::consts::PI / omega.max(gamma).max(m.drag_rate)
            }
            Mechanics::Overdamped => {
                2.0 * std::f64::consts::PI * m.joint_damping / m.joint_stiffness
            }
        };
        0.05 * mech.min(tau_th)
    }
}

/// Mechanical + thermal state. For multi-unit chains the per-segment vectors
/// are the concatenation of every unit's segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub temperature: Vec<f64>,
    pub body: Option<BodyState>,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub x: f64,
    pub v: f64,
}

impl SystemState {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

fn push(errors: &mut Vec<FieldError>, path: impl Into<String>, message: impl Into<String>) {
    errors.push(FieldError {
        path: path.into(),
        message: message.into(),
    });
}

fn finite_positive(errors: &mut Vec<FieldError>, path: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        push(errors, path, format!("must be finite and > 0 (got {v})"));
    }
}

fn check_unit(errors: &mut Vec<FieldError>, path: &str, what: &str, v: [f64; 2]) {
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
        push(errors, path, format!("{what} direction not unit (|d| = {norm})"));
    }
}

fn check_schedule(errors: &mut Vec<FieldError>, path: &str, schedule: &Schedule) {
    if let Some(intervals) = schedule {
        for (i, [a, b]) in intervals.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                push(errors, format!("{path}[{i}]"), "interval must satisfy start < end");
            }
        }
    }
}

/// Collects violations of the geometry/material invariants under `prefix`.
pub(crate) fn validate_parts(
    prefix: &str,
    config: &ScenarioConfig,
    errors: &mut Vec<FieldError>,
) {
    let g = &config.geometry;
    let m = &config.material;
    let p = |s: &str| {
        if prefix.is_empty() {
            s.to_string()
        } else {
            format!("{prefix}.{s}")
        }
    };

    finite_positive(errors, &p("geometry.length"), g.length);
    finite_positive(errors, &p("geometry.width"), g.width);
    finite_positive(errors, &p("geometry.thickness"), g.thickness);
    if g.segment_count < 2 {
        push(errors, p("geometry.segment_count"), "segment_count ≥ 2");
    }
    if let Some(k) = &g.rest_curvature {
        if k.len() != g.segment_count {
            push(
                errors,
                p("geometry.rest_curvature"),
                format!("expected {} entries, got {}", g.segment_count, k.len()),
            );
        }
        if k.iter().any(|v| !v.is_finite()) {
            push(errors, p("geometry.rest_curvature"), "entries must be finite");
        }
    }
    if let TipSupport::Roller {
        stiffness: Some(s),
    } = g.tip_support
    {
        finite_positive(errors, &p("geometry.tip_support.stiffness"), s);
    }
    if g.base_support == BaseSupport::Pinned && g.tip_support == TipSupport::Free {
        push(errors, p("geometry.base_support"), "a pinned base needs a roller tip support");
    }

    finite_positive(errors, &p("material.heat_capacity"), m.heat_capacity);
    finite_positive(errors, &p("material.heat_loss"), m.heat_loss);
    finite_positive(errors, &p("material.joint_stiffness"), m.joint_stiffness);
    finite_positive(errors, &p("material.linear_density"), m.linear_density);
    finite_positive(errors, &p("material.ambient_temperature"), m.ambient_temperature);
    if !(m.drag_rate.is_finite() && m.drag_rate >= 0.0) {
        push(errors, p("material.drag_rate"), "must be ≥ 0");
    }
    if !(m.joint_damping.is_finite() && m.joint_damping >= 0.0) {
        push(errors, p("material.joint_damping"), "must be ≥ 0");
    }
    if config.mechanics == Mechanics::Overdamped && m.joint_damping <= 0.0 {
        push(errors, p("material.joint_damping"), "overdamped mechanics needs damping > 0");
    }
    if !(m.absorptance > 0.0 && m.absorptance <= 1.0) {
        push(errors, p("material.absorptance"), "must lie in (0, 1]");
    }
    if !m.curvature_coeff.is_finite() {
        push(errors, p("material.curvature_coeff"), "must be finite");
    }

    for (i, b) in config.baffles.iter().enumerate() {
        let bp = p(&format!("baffles[{i}]"));
        finite_positive(errors, &format!("{bp}.length"), b.length);
        finite_positive(errors, &format!("{bp}.width"), b.width);
        if let Attach::Segment(s) = b.attach {
            if s >= g.segment_count {
                push(errors, format!("{bp}.attach"), format!("segment {s} out of range"));
            }
        }
        if !b.offset_angle.is_finite() {
            push(errors, format!("{bp}.offset_angle"), "must be finite");
        }
        if !(b.drag_coefficient.is_finite() && b.drag_coefficient >= 0.0) {
            push(errors, format!("{bp}.drag_coefficient"), "must be ≥ 0");
        }
        if !(b.mass.is_finite() && b.mass >= 0.0) {
            push(errors, format!("{bp}.mass"), "must be ≥ 0");
        }
    }

    validate_lights(&p("lights"), &config.lights, errors);

    for (i, d) in config.disturbances.iter().enumerate() {
        let dp = p(&format!("disturbances[{i}]"));
        check_unit(errors, &format!("{dp}.direction"), "disturbance", d.direction);
        if !(d.magnitude.is_finite() && d.magnitude >= 0.0) {
            push(errors, format!("{dp}.magnitude"), "must be ≥ 0");
        }
        check_schedule(errors, &format!("{dp}.schedule"), &d.schedule);
        if let Some(gust) = &d.gust {
            if !(gust.fraction.is_finite() && gust.fraction >= 0.0) {
                push(errors, format!("{dp}.gust.fraction"), "must be ≥ 0");
            }
            finite_positive(errors, &format!("{dp}.gust.interval"), gust.interval);
        }
        if d.kind == DisturbanceKind::Wind
            && d.target == ForceTarget::Tip
            && config.baffles.is_empty()
            && d.magnitude > 0.0
        {
            push(errors, format!("{dp}.kind"), "wind acts on baffles; none configured");
        }
        if d.kind == DisturbanceKind::TipForce && d.target != ForceTarget::Tip && config.baffles.is_empty() {
            push(errors, format!("{dp}.target"), "baffle target but no baffle configured");
        }
    }

    match &config.body {
        BodyCoupling::None => {}
        BodyCoupling::Crawler {
            body_mass,
            friction_forward,
            friction_backward,
            normal_load,
        } => {
            finite_positive(errors, &p("body.body_mass"), *body_mass);
            if !(*friction_forward >= 0.0 && *friction_backward >= 0.0) {
                push(errors, p("body.friction_forward"), "friction coefficients must be ≥ 0");
            }
            if !(*normal_load >= 0.0) {
                push(errors, p("body.normal_load"), "must be ≥ 0");
            }
        }
        BodyCoupling::Swimmer {
            body_mass,
            thrust_coeff,
            linear_drag,
        } => {
            finite_positive(errors, &p("body.body_mass"), *body_mass);
            finite_positive(errors, &p("body.linear_drag"), *linear_drag);
            if !(*thrust_coeff >= 0.0) {
                push(errors, p("body.thrust_coeff"), "must be ≥ 0");
            }
        }
    }

    if let Some(eps) = config.shadow_smoothing {
        finite_positive(errors, &p("shadow_smoothing"), eps);
    }
}

pub(crate) fn validate_lights(path: &str, lights: &[LightField], errors: &mut Vec<FieldError>) {
    for (i, l) in lights.iter().enumerate() {
        let lp = format!("{path}[{i}]");
        check_unit(errors, &format!("{lp}.direction"), "light", l.direction);
        if !(l.intensity_mw_cm2.is_finite() && l.intensity_mw_cm2 >= 0.0) {
            push(errors, format!("{lp}.intensity_mw_cm2"), "must be ≥ 0");
        }
        if !(l.aperture[1] > l.aperture[0]) {
            push(errors, format!("{lp}.aperture"), "aperture must have positive width");
        }
        check_schedule(errors, &format!("{lp}.schedule"), &l.schedule);
    }
}

pub(crate) fn validate_integrator(
    path: &str,
    s: &IntegratorSettings,
    max_dt: f64,
    errors: &mut Vec<FieldError>,
) {
    finite_positive(errors, &format!("{path}.dt"), s.dt);
    if !(s.t_end.is_finite() && s.t_end >= 0.0) {
        push(errors, format!("{path}.t_end"), "must be ≥ 0");
    }
    if s.sample_stride == 0 {
        push(errors, format!("{path}.sample_stride"), "must be ≥ 1");
    }
    finite_positive(errors, &format!("{path}.rtol"), s.rtol);
    finite_positive(errors, &format!("{path}.atol"), s.atol);
    if s.dt.is_finite() && max_dt.is_finite() && s.dt > max_dt * (1.0 + 1e-12) {
        push(
            errors,
            format!("{path}.dt"),
            format!("dt = {} exceeds stability bound {max_dt:.3e}", s.dt),
        );
    }
}

/// Checks every invariant and returns the config with defaults filled in, or
/// every violation found.
pub fn validate(config: &ScenarioConfig) -> Result<ScenarioConfig> {
    let mut errors = Vec::new();
    validate_parts("", config, &mut errors);
    let structurally_ok = errors.is_empty();
    if structurally_ok {
        validate_integrator("integrator", &config.integrator, config.max_stable_dt(), &mut errors);
    } else {
        validate_integrator("integrator", &config.integrator, f64::INFINITY, &mut errors);
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(fill_defaults(config))
}

pub(crate) fn fill_defaults(config: &ScenarioConfig) -> ScenarioConfig {
    let mut out = config.clone();
    if out.geometry.rest_curvature.is_none() {
        out.geometry.rest_curvature = Some(vec![0.0; out.geometry.segment_count]);
    }
    if out.shadow_smoothing.is_none() {
        out.shadow_smoothing = Some(out.geometry.length / 200.0);
    }
    if let TipSupport::Roller { stiffness: None } = out.geometry.tip_support {
        out.geometry.tip_support = TipSupport::Roller {
            stiffness: out.geometry.roller_stiffness(&out.material),
        };
    }
    out
}

fn reflect_vec(v: [f64; 2], base: &Pose) -> [f64; 2] {
    // Reflection about the line through the origin with direction `base.angle`.
    let (s, c) = (2.0 * base.angle).sin_cos();
    [c * v[0] + s * v[1], s * v[0] - c * v[1]]
}

/// Mirror image of a configuration about its base axis. Angles, rest
/// curvatures and the photothermal coefficient change sign; light and
/// disturbance directions are reflected and apertures remapped.
pub fn reflect_config(config: &ScenarioConfig) -> ScenarioConfig {
    let mut out = config.clone();
    let base = config.geometry.base;
    if let Some(k) = out.geometry.rest_curvature.as_mut() {
        k.iter_mut().for_each(|v| *v = -*v);
    }
    out.material.curvature_coeff = -out.material.curvature_coeff;
    for b in &mut out.baffles {
        b.offset_angle = -b.offset_angle;
    }
    for l in &mut out.lights {
        let d = reflect_vec(l.direction, &base);
        // Transverse coordinates flip sign under reflection: u' = -u + 2·(base·n').
        let n_old = l.transverse();
        let u0 = base.x * n_old[0] + base.y * n_old[1];
        let n_new = [-d[1], d[0]];
        let u0_new = base.x * n_new[0] + base.y * n_new[1];
        let map = |u: f64| -(u - u0) + u0_new;
        l.direction = d;
        l.aperture = [map(l.aperture[1]), map(l.aperture[0])];
    }
    for d in &mut out.disturbances {
        d.direction = reflect_vec(d.direction, &base);
    }
    out
}

/// Mirror image of a state about the base axis of a single unit.
pub fn reflect_state(state: &SystemState, base: &Pose) -> SystemState {
    let mut out = state.clone();
    for t in &mut out.theta {
        *t = 2.0 * base.angle - *t;
    }
    for w in &mut out.omega {
        *w = -*w;
    }
    out
}

/// End-to-end reversal of one unit combined with reflection: maps segment
/// `i` to `N-1-i`. A pinned–roller strip with a central baffle under a beam
/// along its normal is invariant under this map.
pub fn reverse_state(state: &SystemState, base: &Pose) -> SystemState {
    let mut out = state.clone();
    let n = state.theta.len();
    for i in 0..n {
        out.theta[i] = 2.0 * base.angle - state.theta[n - 1 - i];
        out.omega[i] = -state.omega[n - 1 - i];
        out.temperature[i] = state.temperature[n - 1 - i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::calibration::ShippedCalibration;
    use crate::scenarios::registry::{arch_unit, oscillator};
    use proptest::prelude::*;

    fn base() -> ScenarioConfig {
        oscillator(&ShippedCalibration::identity())
    }

    fn paths(e: Error) -> Vec<String> {
        match e {
            Error::Validation(errs) => errs.into_iter().map(|f| f.path).collect(),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn registry_config_validates_and_fills_defaults() {
        let mut cfg = base();
        cfg.shadow_smoothing = None;
        cfg.geometry.rest_curvature = None;
        let v = validate(&cfg).unwrap();
        assert_eq!(v.shadow_smoothing, Some(cfg.geometry.length / 200.0));
        assert_eq!(v.geometry.rest_curvature.unwrap().len(), cfg.geometry.segment_count);
    }

    #[test]
    fn every_violation_reported() {
        let mut cfg = base();
        cfg.geometry.length = -1.0;
        cfg.material.absorptance = 1.5;
        cfg.lights[0].direction = [1.0, 1.0];
        let p = paths(validate(&cfg).unwrap_err());
        assert!(p.contains(&"geometry.length".to_string()));
        assert!(p.contains(&"material.absorptance".to_string()));
        assert!(p.iter().any(|s| s.starts_with("lights[0]")));
    }

    #[test]
    fn oversized_step_rejected() {
        let mut cfg = base();
        cfg.integrator.dt = 10.0 * cfg.max_stable_dt();
        assert_eq!(paths(validate(&cfg).unwrap_err()), vec!["integrator.dt".to_string()]);
    }

    #[test]
    fn pinned_base_needs_roller() {
        let mut cfg = arch_unit(&ShippedCalibration::identity());
        cfg.geometry.tip_support = TipSupport::Free;
        assert!(paths(validate(&cfg).unwrap_err()).contains(&"geometry.base_support".to_string()));
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = serde_json::to_value(base()).unwrap();
        v["material"]["stifness"] = serde_json::json!(1.0);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        let ok = ScenarioConfig::from_json(&base().to_json()).unwrap();
        assert_eq!(ok, base());
    }

    #[test]
    fn step_bound_tracks_stiffness() {
        let mut cfg = base();
        let dt = cfg.max_stable_dt();
        cfg.material.joint_stiffness *= 4.0;
        assert!(cfg.max_stable_dt() < dt);
        cfg.mechanics = Mechanics::Overdamped;
        assert!(cfg.max_stable_dt() > 0.0);
    }

    #[test]
    fn schedules() {
        let s: Schedule = Some(vec![[1.0, 2.0], [3.0, 4.0]]);
        assert!(!schedule_active(&s, 0.5));
        assert!(schedule_active(&s, 1.0));
        assert!(!schedule_active(&s, 2.0));
        assert!(schedule_active(&None, 1e9));
        assert_eq!(schedule_edges(&s), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn fuel_helpers_skip_triggers() {
        let mut cfg = arch_unit(&ShippedCalibration::identity());
        let trigger: Vec<f64> = cfg
            .lights
            .iter()
            .filter(|l| l.role == LightRole::Trigger)
            .map(|l| l.intensity_mw_cm2)
            .collect();
        cfg.set_fuel_intensity(77.0);
        assert_eq!(cfg.fuel_intensity_mw_cm2(), 77.0);
        let after: Vec<f64> = cfg
            .lights
            .iter()
            .filter(|l| l.role == LightRole::Trigger)
            .map(|l| l.intensity_mw_cm2)
            .collect();
        assert_eq!(trigger, after);
    }

    proptest! {
        #[test]
        fn unit_conversion_round_trips(x in -1e6f64..1e6) {
            prop_assert!((w_m2_to_mw_cm2(mw_cm2_to_w_m2(x)) - x).abs() <= 1e-9 * x.abs().max(1.0));
        }

        #[test]
        fn reflection_is_an_involution(angle in -3.0f64..3.0, x in -0.01f64..0.01, y in -0.01f64..0.01) {
            let mut cfg = base();
            cfg.geometry.base = Pose { x, y, angle };
            let twice = reflect_config(&reflect_config(&cfg));
            prop_assert_eq!(twice.material.curvature_coeff, cfg.material.curvature_coeff);
            for (a, b) in twice.lights.iter().zip(&cfg.lights) {
                for k in 0..2 {
                    prop_assert!((a.direction[k] - b.direction[k]).abs() < 1e-12);
                    prop_assert!((a.aperture[k] - b.aperture[k]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn state_maps_are_involutions(thetas in proptest::collection::vec(-1.5f64..1.5, 2..12), angle in -1.0f64..1.0) {
            let n = thetas.len();
            let s = SystemState {
                omega: thetas.iter().map(|t| 2.0 * t).collect(),
                temperature: (0..n).map(|i| 300.0 + i as f64).collect(),
                theta: thetas,
                body: None,
                time: 0.0,
            };
            let pose = Pose { x: 0.0, y: 0.0, angle };
            for back in [reflect_state(&reflect_state(&s, &pose), &pose), reverse_state(&reverse_state(&s, &pose), &pose)] {
                for (a, b) in back.theta.iter().zip(&s.theta) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
                prop_assert_eq!(&back.temperature, &s.temperature);
            }
        }
    }
}
