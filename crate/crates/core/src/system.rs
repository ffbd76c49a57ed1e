//! Compiled model: one or more actuator units sharing a light field, with the
//! flat state layout and forward kinematics used by every solver.

use crate::error::{Error, FieldError, Result};
use crate::model::{
    self, Attach, BaseSupport, BodyCoupling, BodyState, LightField, Mechanics, ScenarioConfig,
    SystemState,
};
use crate::optics::{Element, ElementKind};

/// One actuator inside a system: its validated config, where its segments
/// live in the flat state, and the translation applied to its geometry.
#[derive(Debug, Clone)]
pub struct Unit {
    pub config: ScenarioConfig,
    pub offset: usize,
    pub shift: [f64; 2],
}

impl Unit {
    pub fn n(&self) -> usize {
        self.config.geometry.segment_count
    }

    pub fn ell(&self) -> f64 {
        self.config.geometry.segment_length()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.n()
    }

    pub fn base_point(&self) -> [f64; 2] {
        let b = self.config.geometry.base;
        [b.x + self.shift[0], b.y + self.shift[1]]
    }

    /// Index of the first joint carrying a spring: joint 0 couples segment 0
    /// to the base only when the base is clamped.
    pub fn first_joint(&self) -> usize {
        match self.config.geometry.base_support {
            BaseSupport::Clamped => 0,
            BaseSupport::Pinned => 1,
        }
    }

    pub fn kinematics(&self, theta: &[f64]) -> Kinematics {
        Kinematics::new(self, &theta[self.range()])
    }
}

/// Joint positions and segment tangents of one unit.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub ell: f64,
    pub theta: Vec<f64>,
    /// Joint positions p_0 (base) … p_N (tip).
    pub points: Vec<[f64; 2]>,
    pub baffles: Vec<BaffleFrame>,
}

#[derive(Debug, Clone, Copy)]
pub struct BaffleFrame {
    pub segment: usize,
    /// Weights of the segment angles that make up the baffle angle.
    pub weights: [(usize, f64); 2],
    pub angle: f64,
    pub root: [f64; 2],
    pub tip: [f64; 2],
}

pub fn unit_vec(angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c, s]
}

pub fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

impl Kinematics {
    pub fn new(unit: &Unit, theta: &[f64]) -> Self {
        let ell = unit.ell();
        let n = theta.len();
        let mut points = Vec::with_capacity(n + 1);
        let mut p = unit.base_point();
        points.push(p);
        for &t in theta {
            let e = unit_vec(t);
            p = [p[0] + ell * e[0], p[1] + ell * e[1]];
            points.push(p);
        }
        let baffles = unit
            .config
            .baffles
            .iter()
            .map(|b| {
                let segment = b.attach.segment(n);
                let weights = match b.attach {
                    Attach::Segment(i) if i + 1 < n => [(i, 0.5), (i + 1, 0.5)],
                    _ => [(segment, 1.0), (segment, 0.0)],
                };
                let base_angle = weights[0].1 * theta[weights[0].0] + weights[1].1 * theta[weights[1].0];
                let angle = base_angle + b.offset_angle;
                let root = points[segment + 1];
                let e = unit_vec(angle);
                BaffleFrame {
                    segment,
                    weights,
                    angle,
                    root,
                    tip: [root[0] + b.length * e[0], root[1] + b.length * e[1]],
                }
            })
            .collect();
        Self {
            ell,
            theta: theta.to_vec(),
            points,
            baffles,
        }
    }

    pub fn tip(&self) -> [f64; 2] {
        self.points[self.points.len() - 1]
    }

    /// Jacobian of a point at fraction `s` along segment `m`:
    /// column k is dp/dθ_k. Also returns the velocity-squared bias
    /// acceleration for angular velocities `omega`.
    pub fn segment_point_jacobian(&self, m: usize, s: f64, omega: &[f64]) -> PointJacobian {
        let n = self.theta.len();
        let mut cols = vec![[0.0; 2]; n];
        let mut bias = [0.0; 2];
        for k in 0..=m {
            let len = if k == m { s * self.ell } else { self.ell };
            let e = unit_vec(self.theta[k]);
            cols[k] = [-len * e[1], len * e[0]];
            let w2 = omega[k] * omega[k];
            bias[0] -= len * e[0] * w2;
            bias[1] -= len * e[1] * w2;
        }
        PointJacobian { cols, bias }
    }

    /// Jacobian of a point at distance `r` from the root of baffle `b`.
    pub fn baffle_point_jacobian(&self, b: usize, r: f64, omega: &[f64]) -> PointJacobian {
        let frame = &self.baffles[b];
        let mut pj = self.segment_point_jacobian(frame.segment, 1.0, omega);
        let e = unit_vec(frame.angle);
        let psi_dot: f64 = frame.weights.iter().map(|(i, w)| w * omega[*i]).sum();
        for (i, w) in frame.weights {
            pj.cols[i][0] += -r * e[1] * w;
            pj.cols[i][1] += r * e[0] * w;
        }
        pj.bias[0] -= r * e[0] * psi_dot * psi_dot;
        pj.bias[1] -= r * e[1] * psi_dot * psi_dot;
        pj
    }
}

#[derive(Debug, Clone)]
pub struct PointJacobian {
    pub cols: Vec<[f64; 2]>,
    pub bias: [f64; 2],
}

impl PointJacobian {
    /// Generalized force Jᵀ F.
    pub fn generalized(&self, force: [f64; 2], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.cols) {
            *o += c[0] * force[0] + c[1] * force[1];
        }
    }

    pub fn velocity(&self, omega: &[f64]) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (c, w) in self.cols.iter().zip(omega) {
            v[0] += c[0] * w;
            v[1] += c[1] * w;
        }
        v
    }
}

/// A validated model ready for simulation.
#[derive(Debug, Clone)]
pub struct System {
    pub units: Vec<Unit>,
    /// All lights in global coordinates (shared + per-unit, shifted).
    pub lights: Vec<LightField>,
    /// For each light, the unit it belongs to (`None` for shared lights).
    pub light_owner: Vec<Option<usize>>,
    pub body: BodyCoupling,
    pub mechanics: Mechanics,
    pub smoothing: f64,
    pub seed: u64,
    pub rest: SystemState,
}

fn shift_light(light: &LightField, shift: [f64; 2]) -> LightField {
    let mut l = light.clone();
    let n = light.transverse();
    let du = shift[0] * n[0] + shift[1] * n[1];
    l.aperture = [l.aperture[0] + du, l.aperture[1] + du];
    l
}

impl System {
    /// Single-unit system from a scenario config.
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let config = model::validate(config)?;
        Self::assemble(vec![(config, [0.0, 0.0])], Vec::new())
    }

    /// Multi-unit system: every unit keeps its own lights (shifted with it)
    /// and all `shared` lights act on the common scene.
    pub fn chain(units: Vec<(ScenarioConfig, [f64; 2])>, shared: Vec<LightField>) -> Result<Self> {
        let mut errors: Vec<FieldError> = Vec::new();
        let mut validated = Vec::with_capacity(units.len());
        for (i, (cfg, shift)) in units.into_iter().enumerate() {
            match model::validate(&cfg) {
                Ok(c) => validated.push((c, shift)),
                Err(Error::Validation(errs)) => errors.extend(errs.into_iter().map(|e| FieldError {
                    path: format!("units[{i}].{}", e.path),
                    message: e.message,
                })),
                Err(e) => return Err(e),
            }
        }
        model::validate_lights("shared_lights", &shared, &mut errors);
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        Self::assemble(validated, shared)
    }

    fn assemble(units: Vec<(ScenarioConfig, [f64; 2])>, shared: Vec<LightField>) -> Result<Self> {
        let mut out_units = Vec::with_capacity(units.len());
        let mut lights = Vec::new();
        let mut light_owner = Vec::new();
        let mut offset = 0;
        for (k, (config, shift)) in units.into_iter().enumerate() {
            for l in &config.lights {
                lights.push(shift_light(l, shift));
                light_owner.push(Some(k));
            }
            let n = config.geometry.segment_count;
            out_units.push(Unit {
                config,
                offset,
                shift,
            });
            offset += n;
        }
        for l in shared {
            lights.push(l);
            light_owner.push(None);
        }
        let first = &out_units[0].config;
        let body = if out_units.len() == 1 {
            first.body.clone()
        } else {
            BodyCoupling::None
        };
        let mechanics = first.mechanics;
        let seed = first.seed;
        let smoothing = out_units
            .iter()
            .map(|u| u.config.smoothing())
            .fold(f64::INFINITY, f64::min);
        let mut system = Self {
            units: out_units,
            lights,
            light_owner,
            body,
            mechanics,
            smoothing,
            seed,
            rest: SystemState {
                theta: Vec::new(),
                omega: Vec::new(),
                temperature: Vec::new(),
                body: None,
                time: 0.0,
            },
        };
        system.rest = system.kinematic_rest();
        if system.needs_rest_solve() {
            system.rest = crate::dynamics::steady::solve_rest(&system)?;
        }
        Ok(system)
    }

    pub fn segment_count(&self) -> usize {
        self.units.iter().map(|u| u.n()).sum()
    }

    pub fn has_body(&self) -> bool {
        !self.body.is_none()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.units[0].config
    }

    fn needs_rest_solve(&self) -> bool {
        self.units.iter().any(|u| {
            u.config.gravity || u.config.geometry.roller_stiffness(&u.config.material).is_some()
        })
    }

    /// Rest pose from integrating the rest curvature, at ambient temperature.
    fn kinematic_rest(&self) -> SystemState {
        let n = self.segment_count();
        let mut theta = vec![0.0; n];
        let mut temperature = vec![0.0; n];
        for u in &self.units {
            let g = &u.config.geometry;
            let ell = g.segment_length();
            let mut angle = g.base.angle;
            for i in 0..u.n() {
                if i >= u.first_joint() {
                    angle += g.rest_curvature_at(i) * ell;
                }
                theta[u.offset + i] = angle;
                temperature[u.offset + i] = u.config.material.ambient_temperature;
            }
        }
        SystemState {
            theta,
            omega: vec![0.0; n],
            temperature,
            body: self.has_body().then_some(BodyState { x: 0.0, v: 0.0 }),
            time: 0.0,
        }
    }

    pub fn unit_of_segment(&self, i: usize) -> usize {
        self.units
            .iter()
            .position(|u| u.range().contains(&i))
            .expect("segment index in range")
    }

    /// Opaque elements of the whole system in global coordinates.
    pub fn scene_elements(&self, theta: &[f64]) -> Vec<Element> {
        let mut elements = Vec::with_capacity(self.segment_count() + 4);
        let mut baffle_id = 0;
        for u in &self.units {
            let kin = u.kinematics(theta);
            let m = &u.config.material;
            let w = u.config.geometry.width;
            for i in 0..u.n() {
                elements.push(Element {
                    a: kin.points[i],
                    b: kin.points[i + 1],
                    kind: ElementKind::Absorber {
                        segment: u.offset + i,
                        absorptance: m.absorptance,
                        width: w,
                    },
                });
            }
            for (b, frame) in u.config.baffles.iter().zip(&kin.baffles) {
                if b.opaque {
                    elements.push(Element {
                        a: frame.root,
                        b: frame.tip,
                        kind: ElementKind::Blocker {
                            id: baffle_id,
                            width: b.width,
                        },
                    });
                }
                baffle_id += 1;
            }
        }
        elements
    }

    /// Largest admissible step over all units.
    pub fn max_stable_dt(&self) -> f64 {
        self.units
            .iter()
            .map(|u| u.config.max_stable_dt())
            .fold(f64::INFINITY, f64::min)
    }

    /// Thermal time constant of the slowest unit.
    pub fn thermal_time(&self) -> f64 {
        self.units
            .iter()
            .map(|u| u.config.material.thermal_time_constant())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::calibration::ShippedCalibration;
    use crate::scenarios::registry::{arch_chain, oscillator};

    #[test]
    fn straight_strip_reaches_full_length() {
        let system = System::new(&oscillator(&ShippedCalibration::identity())).unwrap();
        let u = &system.units[0];
        let kin = u.kinematics(&vec![u.config.geometry.base.angle; u.n()]);
        let tip = kin.tip();
        let base = u.base_point();
        let reach = (tip[0] - base[0]).hypot(tip[1] - base[1]);
        assert!((reach - u.config.geometry.length).abs() < 1e-12);
        for w in kin.points.windows(2) {
            assert!(((w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) - u.ell()).abs() < 1e-15);
        }
    }

    #[test]
    fn chain_concatenates_units() {
        let chain = arch_chain(&ShippedCalibration::identity(), 3);
        let system = chain.system().unwrap();
        assert_eq!(system.units.len(), 3);
        let n = system.units[0].n();
        assert_eq!(system.segment_count(), 3 * n);
        assert_eq!(system.unit_of_segment(n), 1);
        assert_eq!(system.unit_of_segment(3 * n - 1), 2);
        let elements = system.scene_elements(&system.rest.theta);
        let absorbers = elements
            .iter()
            .filter(|e| matches!(e.kind, ElementKind::Absorber { .. }))
            .count();
        assert_eq!(absorbers, 3 * n);
    }

    #[test]
    fn invalid_config_refused() {
        let mut cfg = oscillator(&ShippedCalibration::identity());
        cfg.geometry.segment_count = 1;
        assert!(matches!(System::new(&cfg), Err(crate::Error::Validation(_))));
    }

    #[test]
    fn point_jacobian_matches_finite_difference() {
        let system = System::new(&oscillator(&ShippedCalibration::identity())).unwrap();
        let u = &system.units[0];
        let n = u.n();
        let theta: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64).sin()).collect();
        let omega = vec![0.0; n];
        let kin = u.kinematics(&theta);
        let jac = kin.segment_point_jacobian(n - 1, 0.5, &omega);
        let h = 1e-7;
        for k in [0, n / 2, n - 1] {
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            let mid = |t: &[f64]| {
                let kk = u.kinematics(t);
                let (a, b) = (kk.points[n - 1], kk.points[n]);
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
            };
            let (p, m) = (mid(&tp), mid(&tm));
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let v = jac.velocity(&e);
            for c in 0..2 {
                assert!(((p[c] - m[c]) / (2.0 * h) - v[c]).abs() < 1e-8);
            }
        }
    }
}
