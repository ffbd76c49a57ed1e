use serde::Serialize;

use crate::dynamics::integrate::unit_observables;
use crate::dynamics::steady::{find_steady_states, newton, stability, Seed, Stability};
use crate::error::{Error, Result};
use crate::model::{ScenarioConfig, SystemState};
use crate::system::System;
use crate::thermomech::absorbed_power;

/// Up and down sweeps differing by more than this anywhere are hysteretic, rad.
pub const HYSTERESIS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResponseCurve {
    /// Fuel intensity, mW/cm².
    pub intensity: Vec<f64>,
    pub delta_alpha: Vec<f64>,
    pub d: Vec<f64>,
    pub curvature: Vec<f64>,
    /// Total absorbed power, W.
    pub power: Vec<f64>,
    pub direction: Direction,
    pub hysteresis: bool,
    /// Index of the first value at which continuation failed.
    pub fold: Option<usize>,
    #[serde(skip)]
    pub states: Vec<SystemState>,
    #[serde(skip)]
    pub stability: Vec<Stability>,
}

impl ResponseCurve {
    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }
}

pub(crate) fn check_monotone(values: &[f64]) -> Result<()> {
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if values.len() < 2 || up || down {
        Ok(())
    } else {
        Err(Error::NonMonotoneGrid)
    }
}

/// Continuation in fuel intensity: each solution seeds the next Newton
/// solve. `values` are visited in the given order and must be strictly
/// monotone; the first point is found from the rest state.
pub fn sweep(config: &ScenarioConfig, values: &[f64]) -> Result<ResponseCurve> {
    check_monotone(values)?;
    let direction = if values.len() >= 2 && values[1] < values[0] {
        Direction::Down
    } else {
        Direction::Up
    };
    let mut curve = ResponseCurve {
        intensity: Vec::new(),
        delta_alpha: Vec::new(),
        d: Vec::new(),
        curvature: Vec::new(),
        power: Vec::new(),
        direction,
        hysteresis: false,
        fold: None,
        states: Vec::new(),
        stability: Vec::new(),
    };
    let mut previous: Option<SystemState> = None;
    for (k, &v) in values.iter().enumerate() {
        let mut cfg = config.clone();
        cfg.set_fuel_intensity(v);
        let system = System::new(&cfg)?;
        let solved = match &previous {
            None => {
                let seeds = [Seed {
                    label: "rest".into(),
                    state: system.rest.clone(),
                }];
                let search = find_steady_states(&system, &seeds, 0.0);
                search
                    .states
                    .into_iter()
                    .next()
                    .map(|s| s.state)
                    .ok_or_else(|| Error::NoSteadyState(format!("at {v} mW/cm²")))
            }
            Some(prev) => newton(&system, prev, 0.0, false).map(|(s, _)| s),
        };
        let state = match solved {
            Ok(s) => s,
            Err(e) if previous.is_none() => return Err(e),
            Err(_) => {
                curve.fold = Some(k);
                break;
            }
        };
        let power = absorbed_power(&system, &state.theta, 0.0).power;
        let obs = unit_observables(&system, 0, &state, &power);
        curve.intensity.push(v);
        curve.d.push(obs[0]);
        curve.delta_alpha.push(obs[2]);
        curve.curvature.push(obs[3]);
        curve.power.push(obs[6]);
        curve.stability.push(stability(&system, &state, 0.0).0);
        curve.states.push(state.clone());
        previous = Some(state);
    }
    Ok(curve)
}

/// Sweeps up then down over `values` (ascending) and sets the hysteresis
/// flag on both curves.
pub fn sweep_both(config: &ScenarioConfig, values: &[f64]) -> Result<(ResponseCurve, ResponseCurve)> {
    let mut up = sweep(config, values)?;
    let reversed: Vec<f64> = values.iter().rev().copied().collect();
    let mut down = sweep(config, &reversed)?;
    let hysteresis = up.intensity.iter().zip(&up.delta_alpha).any(|(v, a)| {
        down.intensity
            .iter()
            .position(|w| w == v)
            .is_some_and(|j| (down.delta_alpha[j] - a).abs() > HYSTERESIS_TOL)
    }) || up.fold.is_some()
        || down.fold.is_some();
    up.hysteresis = hysteresis;
    down.hysteresis = hysteresis;
    Ok((up, down))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::registry::fig1e_grid;
    use crate::scenarios::descriptor;
    use crate::scenarios::BaseConfig;

    fn fig1e_none() -> ScenarioConfig {
        match descriptor("fig1e_none").unwrap().base {
            BaseConfig::Single(c) => *c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn grid_must_be_monotone() {
        assert!(check_monotone(&[1.0, 2.0, 3.0]).is_ok());
        assert!(check_monotone(&[3.0, 2.0]).is_ok());
        assert!(matches!(check_monotone(&[1.0, 3.0, 2.0]), Err(Error::NonMonotoneGrid)));
        assert!(matches!(sweep(&fig1e_none(), &[20.0, 20.0]), Err(Error::NonMonotoneGrid)));
    }

    #[test]
    fn response_grows_with_intensity() {
        let grid = fig1e_grid();
        let curve = sweep(&fig1e_none(), &grid).unwrap();
        assert_eq!(curve.len(), grid.len());
        assert!(curve.delta_alpha.windows(2).all(|w| w[1].abs() > w[0].abs()));
        assert!(curve.power.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn up_and_down_agree_without_bistability() {
        let grid = fig1e_grid();
        let (up, down) = sweep_both(&fig1e_none(), &grid).unwrap();
        assert!(!up.hysteresis);
        let n = up.len();
        for i in 0..n {
            assert!((up.delta_alpha[i] - down.delta_alpha[n - 1 - i]).abs() < HYSTERESIS_TOL);
        }
    }
}
