use serde::Serialize;

use crate::dynamics::integrate::baffle_lean;
use crate::dynamics::steady::{default_seeds, find_steady_states, newton, Stability};
use crate::error::{Error, Result};
use crate::model::{Disturbance, DisturbanceKind, ForceTarget, ScenarioConfig, SystemState};
use crate::system::{Kinematics, System};

#[derive(Debug, Clone, Serialize)]
pub struct RampResult {
    /// (displacement along the force, force) pairs, starting at zero force.
    pub path: Vec<(f64, f64)>,
    /// Trapezoidal ∫F dd from the start to the fold, J.
    pub work: f64,
    pub fold_force: f64,
}

/// Quasi-static force ramp. Each increment is re-solved from the previous
/// solution and accepted only if the displacement moves by at most
/// `max_move`; the increment is halved otherwise. The fold is declared
/// when the increment falls below `1e-7` of the reached force.
pub fn quasi_static_ramp<S: Clone>(
    start: S,
    mut solve: impl FnMut(f64, &S) -> Option<S>,
    displacement: impl Fn(&S) -> f64,
    first_step: f64,
    cap: f64,
    max_move: f64,
) -> Result<RampResult> {
    let mut force: f64 = 0.0;
    let mut state = start;
    let mut d = displacement(&state);
    let mut path = vec![(d, 0.0)];
    let mut step = first_step;
    loop {
        if step < 1e-7 * force.max(first_step) {
            break;
        }
        if force >= cap {
            return Err(Error::FoldNotFound { cap });
        }
        let trial = (force + step).min(cap);
        let accepted = solve(trial, &state).and_then(|s| {
            let dn = displacement(&s);
            ((dn - d).abs() <= max_move).then_some((s, dn))
        });
        match accepted {
            Some((s, dn)) => {
                force = trial;
                state = s;
                d = dn;
                path.push((d, force));
                step *= 1.5;
            }
            None => step *= 0.5,
        }
    }
    let work = path
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    Ok(RampResult {
        path,
        work,
        fold_force: force,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyBarrier {
    /// Work to push state 1 (baffle tip left) to the fold, J.
    pub barrier_1to2: f64,
    pub barrier_2to1: f64,
    pub path_1to2: Vec<(f64, f64)>,
    pub path_2to1: Vec<(f64, f64)>,
    /// Fuel intensity, W/m².
    pub intensity: f64,
    pub fold_force_1to2: f64,
    pub fold_force_2to1: f64,
}

fn with_force(base: &System, force: f64, direction: f64) -> System {
    let mut s = base.clone();
    s.units[0].config.disturbances.push(Disturbance {
        kind: DisturbanceKind::TipForce,
        magnitude: force,
        direction: [direction, 0.0],
        schedule: None,
        gust: None,
        target: ForceTarget::BaffleCouple,
    });
    s
}

/// Horizontal span of the first baffle (tip minus root), the conjugate
/// displacement of the couple.
fn push_point_x(system: &System, state: &SystemState) -> f64 {
    let unit = &system.units[0];
    let kin = Kinematics::new(unit, &state.theta[unit.range()]);
    kin.baffles.first().map_or(0.0, |b| b.tip[0] - b.root[0])
}

/// The two outermost stable states of `system`, ordered by baffle lean.
pub fn bistable_pair(system: &System) -> Result<(SystemState, SystemState)> {
    let search = find_steady_states(system, &default_seeds(system), 0.0);
    let mut stable: Vec<SystemState> = search
        .states
        .into_iter()
        .filter(|s| s.stability == Stability::Stable)
        .map(|s| s.state)
        .collect();
    if stable.len() < 2 {
        return Err(Error::Monostable);
    }
    stable.sort_by(|a, b| baffle_lean(system, 0, a).total_cmp(&baffle_lean(system, 0, b)));
    let last = stable.len() - 1;
    Ok((stable[0].clone(), stable[last].clone()))
}

/// Energy barriers at fuel `intensity` (mW/cm²) by a quasi-static push: a
/// horizontal force on the baffle tip, balanced by the opposite force at the
/// baffle root so that neither support is loaded, ramped from each stable
/// state toward the other until the branch folds.
pub fn compute_barrier(config: &ScenarioConfig, intensity: f64) -> Result<EnergyBarrier> {
    let mut cfg = config.clone();
    cfg.set_fuel_intensity(intensity);
    let system = System::new(&cfg)?;
    let (left, right) = bistable_pair(&system)?;
    let g = &cfg.geometry;
    let max_move = g.length / 500.0;
    let n = g.segment_count as f64;
    let cap = 10.0 * cfg.material.joint_stiffness * n / g.length;
    let first = cap * 1e-5;
    let ramp = |start: SystemState, dir: f64| {
        quasi_static_ramp(
            start,
            |f, s| newton(&with_force(&system, f, dir), s, 0.0, false).ok().map(|r| r.0),
            |s| dir * push_point_x(&system, s),
            first,
            cap,
            max_move,
        )
    };
    let a = ramp(left, 1.0)?;
    let b = ramp(right, -1.0)?;
    Ok(EnergyBarrier {
        barrier_1to2: a.work,
        barrier_2to1: b.work,
        path_1to2: a.path,
        path_2to1: b.path,
        intensity: crate::model::mw_cm2_to_w_m2(intensity),
        fold_force_1to2: a.fold_force,
        fold_force_2to1: b.fold_force,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `U(x) = k (x⁴/4 − x²/2)`; pushing from `x = −1` folds at
    /// `x = −1/√3`, and the work to the fold is `k/9`.
    #[test]
    fn quartic_well_oracle() {
        let k = 2.5;
        let solve = |f: f64, x: &f64| {
            let mut x = *x;
            for _ in 0..60 {
                let g = k * (x * x * x - x) - f;
                let dg = k * (3.0 * x * x - 1.0);
                if dg.abs() < 1e-14 {
                    return None;
                }
                x -= g / dg;
            }
            let g = k * (x * x * x - x) - f;
            (g.abs() < 1e-12).then_some(x)
        };
        let r = quasi_static_ramp(-1.0, solve, |x| *x, 1e-4, 10.0, 1.0 / 500.0).unwrap();
        let exact = k / 9.0;
        assert!((r.work / exact - 1.0).abs() < 0.02, "work {} vs {}", r.work, exact);
        let f_fold = 2.0 * k / (3.0 * 3f64.sqrt());
        assert!((r.fold_force / f_fold - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cap_without_fold() {
        let solve = |f: f64, _: &f64| Some(f);
        assert!(matches!(
            quasi_static_ramp(0.0, solve, |x| *x, 0.01, 1.0, 10.0),
            Err(Error::FoldNotFound { .. })
        ));
    }
}
