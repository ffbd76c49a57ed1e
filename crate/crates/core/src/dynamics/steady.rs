//! Fixed points of the coupled model and their linear stability.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Mechanics, SystemState};
use crate::system::System;
use crate::thermomech::{absorbed_power, external_torques, full_rhs, internal_forces, thermal_rhs, equilibrium_curvature};

/// Eigenvalue real parts within this band of zero are reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-6;
/// Seeds converging to states closer than this (scaled units) are merged.
pub const DEDUP_DISTANCE: f64 = 1e-6;
/// Default tilt of the bistability seeds, rad.
pub const SEED_TILT: f64 = 0.1;
const TEMPERATURE_SCALE: f64 = 100.0;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-12;
const ACCEPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub state: SystemState,
    pub stability: Stability,
    pub leading_real: f64,
    /// Label of the first seed that converged here.
    pub basin: String,
    /// Scaled residual norm at the returned state.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Seed {
    pub label: String,
    pub state: SystemState,
}

#[derive(Debug, Clone, Default)]
pub struct SteadySearch {
    pub states: Vec<SteadyState>,
    /// Seeds whose Newton refinement did not converge, with the reason.
    pub failed: Vec<(String, String)>,
}

impl SteadySearch {
    pub fn stable(&self) -> Vec<&SteadyState> {
        self.states.iter().filter(|s| s.stability == Stability::Stable).collect()
    }

    pub fn unstable(&self) -> Vec<&SteadyState> {
        self.states.iter().filter(|s| s.stability == Stability::Unstable).collect()
    }
}

fn scaled(system: &System, state: &SystemState) -> Vec<f64> {
    let n = system.segment_count();
    let mut z = state.theta.clone();
    z.reserve(n);
    for u in &system.units {
        let amb = u.config.material.ambient_temperature;
        for i in u.range() {
            z.push((state.temperature[i] - amb) / TEMPERATURE_SCALE);
        }
    }
    z
}

fn unscaled(system: &System, z: &[f64], template: &SystemState) -> SystemState {
    let n = system.segment_count();
    let mut s = template.clone();
    s.theta.copy_from_slice(&z[..n]);
    s.omega.iter_mut().for_each(|w| *w = 0.0);
    for u in &system.units {
        let amb = u.config.material.ambient_temperature;
        for i in u.range() {
            s.temperature[i] = amb + TEMPERATURE_SCALE * z[n + i];
        }
    }
    if let Some(b) = s.body.as_mut() {
        b.v = 0.0;
    }
    s
}

/// Scaled algebraic residual: torque balance divided by joint stiffness
/// (rad) and thermal balance divided by heat loss (K/100).
pub fn residual(system: &System, state: &SystemState, t: f64, dark: bool) -> Vec<f64> {
    let n = system.segment_count();
    let power = if dark {
        vec![0.0; n]
    } else {
        absorbed_power(system, &state.theta, t).power
    };
    let mut still = state.clone();
    still.omega.iter_mut().for_each(|w| *w = 0.0);
    let external = if dark {
        dark_external(system, &still, t)
    } else {
        external_torques(system, &still, t)
    };
    let mut out = vec![0.0; 2 * n];
    for u in &system.units {
        let r = u.range();
        let m = &u.config.material;
        let temp = &state.temperature[r.clone()];
        let kappa = equilibrium_curvature(temp, m, &u.config.geometry);
        let q = internal_forces(u, &state.theta[r.clone()], &still.omega[r.clone()], &kappa);
        let dt = thermal_rhs(temp, &power[r.clone()], m);
        for (k, i) in r.enumerate() {
            out[i] = (q[k] + external[i]) / m.joint_stiffness;
            out[n + i] = dt[k] * m.heat_capacity / m.heat_loss / TEMPERATURE_SCALE;
        }
    }
    out
}

/// External forces without disturbances (support and gravity only).
fn dark_external(system: &System, state: &SystemState, t: f64) -> Vec<f64> {
    let mut quiet = system.clone();
    for u in &mut quiet.units {
        u.config.disturbances.clear();
    }
    external_torques(&quiet, state, t)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Damped Newton on the scaled residual from `guess`.
pub fn newton(system: &System, guess: &SystemState, t: f64, dark: bool) -> Result<(SystemState, f64)> {
    let n2 = 2 * system.segment_count();
    let mut z = scaled(system, guess);
    let eval = |z: &[f64]| residual(system, &unscaled(system, z, guess), t, dark);
    let mut f = eval(&z);
    let mut norm = inf_norm(&f);
    for _ in 0..NEWTON_MAX_ITER {
        if !norm.is_finite() {
            break;
        }
        if norm <= NEWTON_TOL {
            break;
        }
        let mut jac = DMatrix::zeros(n2, n2);
        for j in 0..n2 {
            let h = 1e-7 * z[j].abs().max(1.0);
            let mut zp = z.clone();
            zp[j] += h;
            let fp = eval(&zp);
            for i in 0..n2 {
                jac[(i, j)] = (fp[i] - f[i]) / h;
            }
        }
        let Some(step) = jac.lu().solve(&DVector::from_column_slice(&f)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
            let ft = eval(&trial);
            let nt = inf_norm(&ft);
            if nt.is_finite() && nt < norm {
                z = trial;
                f = ft;
                norm = nt;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm <= ACCEPT_TOL {
        Ok((unscaled(system, &z, guess), norm))
    } else {
        Err(Error::NoSteadyState(format!("Newton stalled at residual {norm:.3e}")))
    }
}

/// Gradient-like relaxation: joints follow `Q/(k·τ_r)` with a fast
/// pseudo-time constant, temperatures follow the thermal law.
pub fn relax(system: &System, seed: &SystemState, t: f64) -> SystemState {
    let n = system.segment_count();
    let tau = system.thermal_time();
    let dt = tau / 200.0;
    let thermal_rates = |s: &SystemState| -> Vec<f64> {
        let r = residual(system, s, t, false);
        let mut rates = vec![0.0; 2 * n];
        for u in &system.units {
            let m = &u.config.material;
            let tau_u = m.thermal_time_constant();
            for i in u.range() {
                rates[i] = r[i] * 20.0 / tau;
                rates[n + i] = r[n + i] * TEMPERATURE_SCALE / tau_u;
            }
        }
        rates
    };
    let mut s = seed.clone();
    s.omega.iter_mut().for_each(|w| *w = 0.0);
    let apply = |s: &SystemState, k: &[f64], h: f64| {
        let mut o = s.clone();
        for i in 0..n {
            o.theta[i] += h * k[i];
            o.temperature[i] += h * k[n + i];
        }
        o
    };
    for _ in 0..2000 {
        let k1 = thermal_rates(&s);
        if inf_norm(&k1) * tau < 1e-4 {
            break;
        }
        let k2 = thermal_rates(&apply(&s, &k1, 0.5 * dt));
        let k3 = thermal_rates(&apply(&s, &k2, 0.5 * dt));
        let k4 = thermal_rates(&apply(&s, &k3, dt));
        let k: Vec<f64> = (0..2 * n)
            .map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
            .collect();
        s = apply(&s, &k, dt);
    }
    s
}

/// Packed dynamical state used for linearization: (θ, ω, T) for inertial
/// mechanics, (θ, T) for overdamped. The body coordinate is excluded.
fn dyn_pack(system: &System, s: &SystemState) -> Vec<f64> {
    let mut y = s.theta.clone();
    if system.mechanics == Mechanics::Inertial {
        y.extend_from_slice(&s.omega);
    }
    y.extend_from_slice(&s.temperature);
    y
}

fn dyn_unpack(system: &System, y: &[f64], template: &SystemState) -> SystemState {
    let n = system.segment_count();
    let mut s = template.clone();
    s.theta.copy_from_slice(&y[..n]);
    let mut o = n;
    if system.mechanics == Mechanics::Inertial {
        s.omega.copy_from_slice(&y[n..2 * n]);
        o = 2 * n;
    }
    s.temperature.copy_from_slice(&y[o..o + n]);
    s
}

fn dyn_rate(system: &System, s: &SystemState, t: f64) -> Vec<f64> {
    let d = full_rhs(system, s, t);
    let mut y = d.dtheta;
    if system.mechanics == Mechanics::Inertial {
        y.extend_from_slice(&d.domega);
    }
    y.extend_from_slice(&d.dtemp);
    y
}

/// Central-difference Jacobian of the dynamics at `state` with relative step `h`.
pub fn jacobian(system: &System, state: &SystemState, t: f64, h: f64) -> DMatrix<f64> {
    let y = dyn_pack(system, state);
    let m = y.len();
    let cols: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let step = h * y[j].abs().max(1.0);
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += step;
            ym[j] -= step;
            let fp = dyn_rate(system, &dyn_unpack(system, &yp, state), t);
            let fm = dyn_rate(system, &dyn_unpack(system, &ym, state), t);
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect()
        })
        .collect();
    DMatrix::from_fn(m, m, |i, j| cols[j][i])
}

/// Default relative finite-difference step of the stability Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// Parlett–Reinsch balancing by powers of two; leaves the spectrum unchanged.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    loop {
        let mut done = true;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&j| j != i).map(|j| m[(j, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= 2.0 * rr {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * (c + r) {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Eigenvalues of a real matrix, or `None` if the Schur iteration does not
/// converge.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<nalgebra::Complex<f64>>> {
    let mut b = m.clone();
    balance(&mut b);
    [1e3, 1e6].iter().find_map(|tol| {
        nalgebra::linalg::Schur::try_new(b.clone(), tol * f64::EPSILON, 100 * m.nrows().max(10))
            .map(|s| s.complex_eigenvalues().iter().copied().collect())
    })
}

/// Stability from the eigenvalues of the finite-difference Jacobian. A
/// spectrum that cannot be computed is reported as marginal with a NaN
/// leading real part.
pub fn stability(system: &System, state: &SystemState, t: f64) -> (Stability, f64) {
    let jac = jacobian(system, state, t, JACOBIAN_STEP);
    let Some(eig) = eigenvalues(&jac) else {
        return (Stability::Marginal, f64::NAN);
    };
    let leading = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let class = if leading < -MARGINAL_BAND {
        Stability::Stable
    } else if leading > MARGINAL_BAND {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    (class, leading)
}

/// Leading eigenvalue (largest real part) with its imaginary part.
pub fn leading_eigenvalue(system: &System, state: &SystemState, t: f64) -> (f64, f64) {
    let jac = jacobian(system, state, t, JACOBIAN_STEP);
    eigenvalues(&jac)
        .unwrap_or_default()
        .iter()
        .map(|z| (z.re, z.im.abs()))
        .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a })
}

/// Applies a tilt of `amount` rad to unit `u`. Strips with a tip support get
/// an antisymmetric mode that rotates the centre and keeps the tip on its
/// axis; cantilevers get a uniform bend that rotates the tip.
pub fn tilt(system: &System, state: &SystemState, u: usize, amount: f64) -> SystemState {
    let unit = &system.units[u];
    let n = unit.n();
    let roller = unit.config.geometry.roller_stiffness(&unit.config.material).is_some();
    let mut s = state.clone();
    for (k, i) in unit.range().enumerate() {
        let x = (k as f64 + 0.5) / n as f64;
        s.theta[i] += if roller {
            -amount * (2.0 * std::f64::consts::PI * x).cos()
        } else {
            amount * (k as f64 + 1.0) / n as f64
        };
    }
    s
}

/// Rest, +tilt and −tilt seeds (tilt applied to every unit).
pub fn default_seeds(system: &System) -> Vec<Seed> {
    let rest = system.rest.clone();
    let mut plus = rest.clone();
    let mut minus = rest.clone();
    for u in 0..system.units.len() {
        plus = tilt(system, &plus, u, SEED_TILT);
        minus = tilt(system, &minus, u, -SEED_TILT);
    }
    vec![
        Seed { label: "rest".into(), state: rest },
        Seed { label: "+tilt".into(), state: plus },
        Seed { label: "-tilt".into(), state: minus },
    ]
}

/// Relax + Newton from every seed, with lights frozen at time `t`;
/// deduplicated states in seed order, each with its stability.
pub fn find_steady_states(system: &System, seeds: &[Seed], t: f64) -> SteadySearch {
    let results: Vec<(String, Result<(SystemState, f64)>)> = seeds
        .par_iter()
        .map(|seed| {
            let relaxed = relax(system, &seed.state, t);
            (seed.label.clone(), newton(system, &relaxed, t, false))
        })
        .collect();
    let mut search = SteadySearch::default();
    for (label, r) in results {
        match r {
            Ok((mut state, residual)) => {
                state.time = t;
                let z = scaled(system, &state);
                let dup = search.states.iter().any(|s| {
                    let w = scaled(system, &s.state);
                    inf_norm(&z.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>()) < DEDUP_DISTANCE
                });
                if !dup {
                    let (stability, leading_real) = stability(system, &state, t);
                    search.states.push(SteadyState {
                        state,
                        stability,
                        leading_real,
                        basin: label,
                        residual,
                    });
                }
            }
            Err(e) => search.failed.push((label, e.to_string())),
        }
    }
    search
}

/// The single steady state at time `t`; errors when the default seeds find
/// more than one.
pub fn unique_steady_state(system: &System, t: f64) -> Result<SteadyState> {
    let search = find_steady_states(system, &default_seeds(system), t);
    match search.states.len() {
        0 => Err(Error::NoSteadyState(
            search.failed.first().map_or_else(String::new, |f| f.1.clone()),
        )),
        1 => Ok(search.states.into_iter().next().expect("one state")),
        _ => Err(Error::AmbiguousSteadyState),
    }
}

/// Unlit equilibrium under supports and gravity, from the kinematic rest.
pub fn solve_rest(system: &System) -> Result<SystemState> {
    newton(system, &system.rest, 0.0, true).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::calibration::ShippedCalibration;
    use crate::scenarios::registry::{arch_unit, oscillator};

    #[test]
    fn lit_arch_is_bistable() {
        let cfg = arch_unit(&ShippedCalibration::identity());
        let system = System::new(&cfg).unwrap();
        let found = find_steady_states(&system, &default_seeds(&system), 0.0);
        assert_eq!(found.stable().len(), 2);
        assert_eq!(found.unstable().len(), 1);
        for s in found.stable() {
            assert!(s.leading_real < 0.0);
            assert!(s.residual < 1e-6);
        }
    }

    #[test]
    fn newton_recovers_a_known_root() {
        let system = System::new(&oscillator(&ShippedCalibration::identity())).unwrap();
        let root = unique_steady_state(&system, 0.0).unwrap();
        let nudged = tilt(&system, &root.state, 0, 1e-3);
        let (back, res) = newton(&system, &nudged, 0.0, false).unwrap();
        assert!(res < 1e-8);
        for (a, b) in back.theta.iter().zip(&root.state.theta) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn jacobian_is_step_insensitive() {
        let system = System::new(&oscillator(&ShippedCalibration::identity())).unwrap();
        let s = unique_steady_state(&system, 0.0).unwrap().state;
        let a = jacobian(&system, &s, 0.0, JACOBIAN_STEP);
        let b = jacobian(&system, &s, 0.0, 4.0 * JACOBIAN_STEP);
        assert!((&a - &b).norm() <= 1e-4 * a.norm());
        assert!(eigenvalues(&a).is_some());
    }
}
