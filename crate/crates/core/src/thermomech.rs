//! Right-hand side of the coupled opto-thermo-mechanical model.
//!
//! Thermal: lumped Newton cooling per segment. Mechanical: a discrete planar
//! elastica in absolute segment angles with joint springs whose rest angle
//! follows the photothermal equilibrium curvature. External loads enter as
//! generalized forces `Jᵀ F`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{
    schedule_active, ActuatorGeometry, BodyCoupling, DisturbanceKind, ForceTarget, MaterialParams,
    Mechanics, SystemState, AIR_DENSITY, GRAVITY,
};
use crate::optics::{cast_shadows, Beam, ShadowScene};
use crate::system::{perp, unit_vec, Kinematics, PointJacobian, System, Unit};

/// Regularization speed of the crawler's Coulomb friction, m/s.
pub const FRICTION_REGULARIZATION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub dtheta: Vec<f64>,
    pub domega: Vec<f64>,
    pub dtemp: Vec<f64>,
    pub dbody: Option<[f64; 2]>,
}

impl Derivatives {
    pub fn is_finite(&self) -> bool {
        self.dtheta
            .iter()
            .chain(&self.domega)
            .chain(&self.dtemp)
            .chain(self.dbody.iter().flatten())
            .all(|v| v.is_finite())
    }

    /// First segment index with a non-finite derivative.
    pub fn first_non_finite(&self) -> Option<usize> {
        let n = self.dtheta.len();
        (0..n).find(|&i| {
            !(self.dtheta[i].is_finite() && self.domega[i].is_finite() && self.dtemp[i].is_finite())
        })
    }
}

/// Absorbed power per segment and the intensity-weighted illuminated fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Absorption {
    pub power: Vec<f64>,
    pub fraction: Vec<f64>,
}

/// Superposes every light that is on at `t` over the shared shadow scene.
pub fn absorbed_power(system: &System, theta: &[f64], t: f64) -> Absorption {
    let n = system.segment_count();
    let mut power = vec![0.0; n];
    let mut fraction = vec![0.0; n];
    let mut weight = 0.0;
    let elements = system.scene_elements(theta);
    for light in &system.lights {
        if !schedule_active(&light.schedule, t) || light.intensity_mw_cm2 <= 0.0 {
            continue;
        }
        let scene = ShadowScene {
            elements: elements.clone(),
            beam: Beam {
                direction: light.direction,
                aperture: light.aperture,
                intensity: light.intensity_w_m2(),
            },
        };
        let result = cast_shadows(&scene, system.smoothing);
        let intensity = light.intensity_w_m2();
        weight += intensity;
        for (k, e) in elements.iter().enumerate() {
            if let crate::optics::ElementKind::Absorber { segment, .. } = e.kind {
                power[segment] += result.power[k];
                fraction[segment] += intensity * result.fraction[k];
            }
        }
    }
    if weight > 0.0 {
        fraction.iter_mut().for_each(|f| *f /= weight);
    }
    Absorption { power, fraction }
}

/// `dT/dt = (P − h·(T − T_amb)) / C` per segment.
pub fn thermal_rhs(temperature: &[f64], power: &[f64], material: &MaterialParams) -> Vec<f64> {
    temperature
        .iter()
        .zip(power)
        .map(|(t, p)| {
            (p - material.heat_loss * (t - material.ambient_temperature)) / material.heat_capacity
        })
        .collect()
}

/// Equilibrium curvature per joint, `κ0 + β·(T_joint − T_amb)`, where the
/// joint temperature is the mean of its two segments (segment 0 for the base
/// joint).
pub fn equilibrium_curvature(
    temperature: &[f64],
    material: &MaterialParams,
    geometry: &ActuatorGeometry,
) -> Vec<f64> {
    (0..temperature.len())
        .map(|j| {
            let t = if j == 0 {
                temperature[0]
            } else {
                0.5 * (temperature[j - 1] + temperature[j])
            };
            geometry.rest_curvature_at(j)
                + material.curvature_coeff * (t - material.ambient_temperature)
        })
        .collect()
}

/// Joint relative angles `θ_j − θ_{j−1}` (joint 0 measured from the base angle).
pub fn relative_angles(unit: &Unit, theta: &[f64]) -> Vec<f64> {
    let base = unit.config.geometry.base.angle;
    (0..theta.len())
        .map(|j| {
            if j == 0 {
                theta[0] - base
            } else {
                theta[j] - theta[j - 1]
            }
        })
        .collect()
}

/// Spring and damper torque at every joint that exists (None for a pinned base joint).
pub fn joint_torques(unit: &Unit, theta: &[f64], omega: &[f64], kappa_eq: &[f64]) -> Vec<Option<f64>> {
    let m = &unit.config.material;
    let ell = unit.ell();
    let rel = relative_angles(unit, theta);
    (0..theta.len())
        .map(|j| {
            if j < unit.first_joint() {
                return None;
            }
            let rel_omega = if j == 0 { omega[0] } else { omega[j] - omega[j - 1] };
            Some(-m.joint_stiffness * (rel[j] - kappa_eq[j] * ell) - m.joint_damping * rel_omega)
        })
        .collect()
}

/// Mass points of one unit as (jacobian, mass); segment masses sit at the
/// segment centres, baffle masses at baffle centroids.
fn mass_points(unit: &Unit, kin: &Kinematics, omega: &[f64]) -> Vec<(PointJacobian, f64)> {
    let rho = unit.config.material.linear_density;
    let ell = unit.ell();
    let mut pts: Vec<(PointJacobian, f64)> = (0..unit.n())
        .map(|m| (kin.segment_point_jacobian(m, 0.5, omega), rho * ell))
        .collect();
    for (b, baffle) in unit.config.baffles.iter().enumerate() {
        if baffle.mass > 0.0 {
            pts.push((kin.baffle_point_jacobian(b, 0.5 * baffle.length, omega), baffle.mass));
        }
    }
    pts
}

/// Configuration-dependent mass matrix of one unit.
pub fn mass_matrix(unit: &Unit, kin: &Kinematics, omega: &[f64]) -> DMatrix<f64> {
    let n = unit.n();
    let ell = unit.ell();
    let rho = unit.config.material.linear_density;
    let mut mass = DMatrix::zeros(n, n);
    for (pj, m) in mass_points(unit, kin, omega) {
        for i in 0..n {
            let ci = pj.cols[i];
            if ci == [0.0, 0.0] {
                continue;
            }
            for k in 0..n {
                let ck = pj.cols[k];
                mass[(i, k)] += m * (ci[0] * ck[0] + ci[1] * ck[1]);
            }
        }
    }
    for i in 0..n {
        mass[(i, i)] += rho * ell.powi(3) / 12.0;
    }
    for (b, frame) in unit.config.baffles.iter().zip(&kin.baffles) {
        let inertia = b.mass * b.length * b.length / 12.0;
        for (i, wi) in frame.weights {
            for (k, wk) in frame.weights {
                mass[(i, k)] += inertia * wi * wk;
            }
        }
    }
    mass
}

/// Piecewise-constant gust multiplier. Each `(seed, stream, bin)` maps to a
/// fixed position of a ChaCha stream, so any stage time can be evaluated
/// without replaying earlier draws.
fn gust_factor(seed: u64, stream: u64, t: f64, fraction: f64, interval: f64) -> f64 {
    let bin = (t / interval).floor().max(0.0) as u128;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(bin * 64);
    let z: f64 = StandardNormal.sample(&mut rng);
    (1.0 + fraction * z).max(0.0)
}

/// Drag force on a flat baffle: `½·ρ_air·Cd·A·|cos(normal, wind)|·v²` along the wind.
pub fn baffle_drag(area: f64, drag_coefficient: f64, baffle_angle: f64, wind_dir: [f64; 2], speed: f64) -> [f64; 2] {
    let normal = perp(unit_vec(baffle_angle));
    let cos = (normal[0] * wind_dir[0] + normal[1] * wind_dir[1]).abs();
    let f = 0.5 * AIR_DENSITY * drag_coefficient * area * cos * speed * speed;
    [f * wind_dir[0], f * wind_dir[1]]
}

/// Generalized external forces (torque conjugate to each absolute segment
/// angle) from wind, tip forces, tip support and gravity, for every unit.
/// Light triggers act only through absorbed power.
pub fn external_torques(system: &System, state: &SystemState, t: f64) -> Vec<f64> {
    let mut q = vec![0.0; system.segment_count()];
    for (u_idx, unit) in system.units.iter().enumerate() {
        let kin = unit.kinematics(&state.theta);
        let omega = &state.omega[unit.range()];
        let out = &mut q[unit.range()];
        unit_external(system.seed, u_idx, unit, &kin, omega, t, out);
    }
    q
}

fn unit_external(
    seed: u64,
    u_idx: usize,
    unit: &Unit,
    kin: &Kinematics,
    omega: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let cfg = &unit.config;
    let n = unit.n();
    for (d_idx, d) in cfg.disturbances.iter().enumerate() {
        if !schedule_active(&d.schedule, t) || d.magnitude == 0.0 {
            continue;
        }
        let factor = d.gust.as_ref().map_or(1.0, |g| {
            gust_factor(seed, ((u_idx as u64) << 32) | d_idx as u64, t, g.fraction, g.interval)
        });
        match d.kind {
            DisturbanceKind::Wind => {
                let speed = d.magnitude * factor;
                for (b, (baffle, frame)) in cfg.baffles.iter().zip(&kin.baffles).enumerate() {
                    let force = baffle_drag(
                        baffle.length * baffle.width,
                        baffle.drag_coefficient,
                        frame.angle,
                        d.direction,
                        speed,
                    );
                    kin.baffle_point_jacobian(b, 0.5 * baffle.length, omega)
                        .generalized(force, out);
                }
            }
            DisturbanceKind::TipForce => {
                let f = d.magnitude * factor;
                let force = [f * d.direction[0], f * d.direction[1]];
                match d.target {
                    ForceTarget::BaffleTip if !cfg.baffles.is_empty() => {
                        kin.baffle_point_jacobian(0, cfg.baffles[0].length, omega)
                            .generalized(force, out);
                    }
                    ForceTarget::BaffleCouple if !cfg.baffles.is_empty() => {
                        kin.baffle_point_jacobian(0, cfg.baffles[0].length, omega)
                            .generalized(force, out);
                        kin.baffle_point_jacobian(0, 0.0, omega)
                            .generalized([-force[0], -force[1]], out);
                    }
                    _ => kin.segment_point_jacobian(n - 1, 1.0, omega).generalized(force, out),
                }
            }
        }
    }
    if let Some(k) = cfg.geometry.roller_stiffness(&cfg.material) {
        let base = unit.base_point();
        let normal = perp(unit_vec(cfg.geometry.base.angle));
        let tip = kin.tip();
        let offset = (tip[0] - base[0]) * normal[0] + (tip[1] - base[1]) * normal[1];
        let force = [-k * offset * normal[0], -k * offset * normal[1]];
        kin.segment_point_jacobian(n - 1, 1.0, omega)
            .generalized(force, out);
    }
    if cfg.gravity {
        for (pj, m) in mass_points(unit, kin, omega) {
            pj.generalized([0.0, -m * GRAVITY], out);
        }
    }
}

/// Output of the mechanical model for one unit.
#[derive(Debug, Clone)]
pub struct MechanicalRates {
    pub dtheta: Vec<f64>,
    pub domega: Vec<f64>,
    /// Horizontal force the actuator exerts on its mount, N (inertial mode).
    pub mount_reaction_x: f64,
}

/// Generalized internal (spring + damper) forces.
pub fn internal_forces(unit: &Unit, theta: &[f64], omega: &[f64], kappa_eq: &[f64]) -> Vec<f64> {
    let n = theta.len();
    let mut q = vec![0.0; n];
    for (j, tau) in joint_torques(unit, theta, omega, kappa_eq).into_iter().enumerate() {
        if let Some(tau) = tau {
            q[j] += tau;
            if j > 0 {
                q[j - 1] -= tau;
            }
        }
    }
    q
}

/// Angular accelerations of one unit under joint springs/dampers with rest
/// angles `κ_eq·ℓ` plus the generalized external forces `external`.
pub fn mechanical_rhs(
    unit: &Unit,
    theta: &[f64],
    omega: &[f64],
    kappa_eq: &[f64],
    external: &[f64],
    mechanics: Mechanics,
) -> MechanicalRates {
    let n = unit.n();
    let mut q = internal_forces(unit, theta, omega, kappa_eq);
    for (qi, e) in q.iter_mut().zip(external) {
        *qi += e;
    }
    match mechanics {
        Mechanics::Overdamped => {
            let c = unit.config.material.joint_damping;
            MechanicalRates {
                dtheta: q.iter().map(|v| v / c).collect(),
                domega: vec![0.0; n],
                mount_reaction_x: 0.0,
            }
        }
        Mechanics::Inertial => {
            let kin = Kinematics::new(unit, theta);
            let points = mass_points(unit, &kin, omega);
            let mut mass = DMatrix::zeros(n, n);
            let mut rhs = DVector::from_vec(q);
            for (pj, m) in &points {
                for i in 0..n {
                    let ci = pj.cols[i];
                    rhs[i] -= m * (ci[0] * pj.bias[0] + ci[1] * pj.bias[1]);
                    if ci == [0.0, 0.0] {
                        continue;
                    }
                    for k in 0..n {
                        let ck = pj.cols[k];
                        mass[(i, k)] += m * (ci[0] * ck[0] + ci[1] * ck[1]);
                    }
                }
            }
            let ell = unit.ell();
            let rho = unit.config.material.linear_density;
            for i in 0..n {
                mass[(i, i)] += rho * ell.powi(3) / 12.0;
            }
            for (b, frame) in unit.config.baffles.iter().zip(&kin.baffles) {
                let inertia = b.mass * b.length * b.length / 12.0;
                for (i, wi) in frame.weights {
                    for (k, wk) in frame.weights {
                        mass[(i, k)] += inertia * wi * wk;
                    }
                }
            }
            let drag = unit.config.material.drag_rate;
            let mut drag_x = 0.0;
            if drag > 0.0 {
                let w = DVector::from_column_slice(omega);
                rhs -= drag * (&mass * w);
                for (pj, m) in &points {
                    drag_x -= drag * m * pj.cols.iter().zip(omega).map(|(c, w)| c[0] * w).sum::<f64>();
                }
            }
            let accel = mass
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .unwrap_or_else(|| DVector::from_element(n, f64::NAN));
            let mut momentum_rate = 0.0;
            for (pj, m) in &points {
                let mut ax = pj.bias[0];
                for (c, a) in pj.cols.iter().zip(accel.iter()) {
                    ax += c[0] * a;
                }
                momentum_rate += m * ax;
            }
            MechanicalRates {
                dtheta: omega.to_vec(),
                domega: accel.iter().copied().collect(),
                mount_reaction_x: drag_x - momentum_rate,
            }
        }
    }
}

/// Body degree of freedom: crawler (friction-biased slider driven by the
/// actuator's horizontal reaction) or swimmer (thrust ∝ baffle speed²).
pub fn body_rhs(
    body: &BodyCoupling,
    velocity: f64,
    mount_reaction_x: f64,
    tip_speed: f64,
    thrust_direction: f64,
) -> [f64; 2] {
    match *body {
        BodyCoupling::None => [0.0, 0.0],
        BodyCoupling::Crawler {
            body_mass,
            friction_forward,
            friction_backward,
            normal_load,
        } => {
            let mu = if velocity > 0.0 {
                friction_forward
            } else {
                friction_backward
            };
            let friction = mu * normal_load * (velocity / FRICTION_REGULARIZATION).tanh();
            [velocity, (mount_reaction_x - friction) / body_mass]
        }
        BodyCoupling::Swimmer {
            body_mass,
            thrust_coeff,
            linear_drag,
        } => {
            let thrust = thrust_coeff * tip_speed * tip_speed * thrust_direction;
            [velocity, (thrust - linear_drag * velocity) / body_mass]
        }
    }
}

/// Linear speed of the swimmer's paddle: first baffle tip speed, or the
/// actuator tip speed without a baffle.
pub fn paddle_speed(unit: &Unit, theta: &[f64], omega: &[f64]) -> f64 {
    let cfg = &unit.config;
    let n = unit.n();
    if cfg.baffles.is_empty() {
        unit.ell() * omega[n - 1].abs()
    } else {
        let kin = Kinematics::new(unit, theta);
        let frame = &kin.baffles[0];
        let psi_dot: f64 = frame.weights.iter().map(|(i, w)| w * omega[*i]).sum();
        cfg.baffles[0].length * psi_dot.abs()
    }
}

/// Sign of the swimmer thrust along x: away from the first fuel light.
pub fn thrust_direction(system: &System) -> f64 {
    system
        .lights
        .first()
        .map(|l| if l.direction[0] < 0.0 { -1.0 } else { 1.0 })
        .unwrap_or(1.0)
}

/// Full composition: optics → thermal → curvature → mechanics (+ body).
pub fn full_rhs(system: &System, state: &SystemState, t: f64) -> Derivatives {
    let absorption = absorbed_power(system, &state.theta, t);
    let external = external_torques(system, state, t);
    rhs_with(system, state, &absorption.power, &external)
}

/// `full_rhs` with precomputed absorbed power and external forces.
pub fn rhs_with(system: &System, state: &SystemState, power: &[f64], external: &[f64]) -> Derivatives {
    let n = system.segment_count();
    let mut dtheta = vec![0.0; n];
    let mut domega = vec![0.0; n];
    let mut dtemp = vec![0.0; n];
    let mut reaction = 0.0;
    for unit in &system.units {
        let r = unit.range();
        let cfg = &unit.config;
        let temp = &state.temperature[r.clone()];
        dtemp[r.clone()].copy_from_slice(&thermal_rhs(temp, &power[r.clone()], &cfg.material));
        let kappa = equilibrium_curvature(temp, &cfg.material, &cfg.geometry);
        let mech = mechanical_rhs(
            unit,
            &state.theta[r.clone()],
            &state.omega[r.clone()],
            &kappa,
            &external[r.clone()],
            system.mechanics,
        );
        dtheta[r.clone()].copy_from_slice(&mech.dtheta);
        domega[r].copy_from_slice(&mech.domega);
        reaction += mech.mount_reaction_x;
    }
    let dbody = state.body.map(|b| {
        let unit = &system.units[0];
        let speed = paddle_speed(unit, &state.theta[unit.range()], &state.omega[unit.range()]);
        body_rhs(&system.body, b.v, reaction, speed, thrust_direction(system))
    });
    Derivatives {
        dtheta,
        domega,
        dtemp,
        dbody,
    }
}

/// Mechanical energy of one unit: kinetic + joint springs (at the given
/// equilibrium curvature) + tip support spring.
pub fn mechanical_energy(unit: &Unit, theta: &[f64], omega: &[f64], kappa_eq: &[f64]) -> f64 {
    let kin = Kinematics::new(unit, theta);
    let mass = mass_matrix(unit, &kin, omega);
    let w = DVector::from_column_slice(omega);
    let kinetic = 0.5 * (w.transpose() * &mass * &w)[(0, 0)];
    let m = &unit.config.material;
    let ell = unit.ell();
    let rel = relative_angles(unit, theta);
    let elastic: f64 = (unit.first_joint()..theta.len())
        .map(|j| 0.5 * m.joint_stiffness * (rel[j] - kappa_eq[j] * ell).powi(2))
        .sum();
    let support = unit
        .config
        .geometry
        .roller_stiffness(m)
        .map_or(0.0, |k| {
            let base = unit.base_point();
            let normal = perp(unit_vec(unit.config.geometry.base.angle));
            let tip = kin.tip();
            let off = (tip[0] - base[0]) * normal[0] + (tip[1] - base[1]) * normal[1];
            0.5 * k * off * off
        });
    kinetic + elastic + support
}
