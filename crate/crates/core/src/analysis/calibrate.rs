use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::kinetics::settling_time_constant;
use crate::analysis::oscillation::oscillation_metrics;
use crate::dynamics::chain::signed_seed;
use crate::dynamics::integrate::{integrate, simulate};
use crate::dynamics::steady::{leading_eigenvalue, unique_steady_state};
use crate::error::{Error, FieldError, Result};
use crate::model::{validate, ScenarioConfig};
use crate::scenarios::overrides::{apply_overrides, get_number};
use crate::system::System;

pub const MAX_FREE_PARAMS: usize = 6;
pub const DEFAULT_MAX_EVALUATIONS: usize = 500;
const PENALTY: f64 = 1e12;

#[derive(Debug, Clone, Serialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Derivative-free simplex descent (reflection 1, expansion 2, contraction
/// 0.5, shrink 0.5) with bounds enforced by projection. Returns the best
/// point seen when the evaluation budget runs out.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_evals: usize,
) -> NelderMeadResult {
    let n = x0.len();
    let project = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        if evals.get() >= max_evals {
            return f64::INFINITY;
        }
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    project(&mut start);
    let v0 = eval(&start);
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let mut p = start.clone();
        p[i] += step[i];
        if p[i] > upper[i] {
            p[i] = start[i] - step[i];
        }
        project(&mut p);
        let v = eval(&p);
        simplex.push((p, v));
    }
    while evals.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() <= 1e-14 * simplex[0].1.abs().max(1e-300) && spread.is_finite() {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|p| p.0[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut p: Vec<f64> = (0..n).map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i])).collect();
            project(&mut p);
            p
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let mut x: Vec<f64> = (0..n).map(|i| best[i] + 0.5 * (p.0[i] - best[i])).collect();
                    project(&mut x);
                    let v = eval(&x);
                    *p = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NelderMeadResult {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        evaluations: evals.get(),
    }
}

/// Scalar extracted from a target scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// `C/h`, s.
    ThermalTimeConstant,
    /// `|Im λ|/2π` of the leading eigenvalue at the steady state, Hz.
    LinearFrequency,
    /// First harmonic of the simulated tip displacement, Hz.
    OscillationFrequency,
    /// Steady tip-angle change at the config's fuel intensity, rad.
    SteadyDeltaAlpha,
    /// Settling time constant of the baffle displacement after fuel-on from a
    /// −x tilt seed, s.
    KineticTau,
}

impl Observable {
    pub fn extract(&self, config: &ScenarioConfig) -> Result<f64> {
        match self {
            Observable::ThermalTimeConstant => Ok(config.material.thermal_time_constant()),
            Observable::LinearFrequency => {
                let system = System::new(config)?;
                let steady = unique_steady_state(&system, 0.0)?;
                let (_, im) = leading_eigenvalue(&system, &steady.state, 0.0);
                Ok(im / (2.0 * std::f64::consts::PI))
            }
            Observable::OscillationFrequency => {
                let trace = integrate(config, None)?;
                let m = oscillation_metrics(&trace.time, trace.d())?;
                m.f1.ok_or_else(|| Error::InsufficientData("no oscillation".into()))
            }
            Observable::SteadyDeltaAlpha => {
                let system = System::new(config)?;
                let steady = unique_steady_state(&system, 0.0)?;
                let n = system.segment_count();
                Ok(steady.state.theta[n - 1] - system.rest.theta[n - 1])
            }
            Observable::KineticTau => {
                let system = System::new(config)?;
                let initial = signed_seed(&system, &[-1]);
                let trace = simulate(&system, &initial, &config.integrator)?;
                settling_time_constant(&trace.time, &trace.units[0].baffle_dx)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParam {
    /// Dotted path into the target configs, e.g. `material.heat_loss`.
    pub path: String,
    pub lower: f64,
    pub upper: f64,
    /// Indices of the targets this parameter applies to; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<usize>>,
}

impl FreeParam {
    fn applies_to(&self, target: usize) -> bool {
        self.targets.as_ref().is_none_or(|t| t.contains(&target))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub config: ScenarioConfig,
    pub observable: Observable,
    pub value: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub free: Vec<FreeParam>,
    pub targets: Vec<Target>,
    #[serde(default = "default_budget")]
    pub max_evaluations: usize,
}

fn default_budget() -> usize {
    DEFAULT_MAX_EVALUATIONS
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub parameters: Vec<(String, f64)>,
    pub initial: Vec<(String, f64)>,
    /// Relative residual `(value − target)/target` per target.
    pub residuals: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluations: usize,
}

fn configured(index: usize, target: &Target, free: &[FreeParam], x: &[f64]) -> Result<ScenarioConfig> {
    let overrides: Vec<_> = free
        .iter()
        .zip(x)
        .filter(|(p, _)| p.applies_to(index))
        .map(|(p, v)| (p.path.clone(), serde_json::json!(v)))
        .collect();
    let cfg = apply_overrides(&target.config, &overrides)?;
    validate(&cfg)
}

fn residuals(free: &[FreeParam], targets: &[Target], x: &[f64]) -> Vec<Option<f64>> {
    targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let cfg = configured(i, t, free, x).ok()?;
            let v = t.observable.extract(&cfg).ok()?;
            Some((v - t.value) / t.value)
        })
        .collect()
}

fn objective(targets: &[Target], r: &[Option<f64>]) -> f64 {
    targets
        .iter()
        .zip(r)
        .map(|(t, r)| r.map_or(PENALTY, |r| t.weight * r * r))
        .sum()
}

/// Fits `free` parameters (shared by every target config) by minimizing the
/// weighted sum of squared relative residuals.
pub fn calibrate(free: &[FreeParam], targets: &[Target], max_evals: usize) -> Result<CalibrationResult> {
    let mut errors = Vec::new();
    if free.is_empty() || free.len() > MAX_FREE_PARAMS {
        errors.push(FieldError {
            path: "free".into(),
            message: format!("between 1 and {MAX_FREE_PARAMS} free parameters"),
        });
    }
    for (i, p) in free.iter().enumerate() {
        if !(p.lower < p.upper) {
            errors.push(FieldError {
                path: format!("free[{i}]"),
                message: "lower must be below upper".into(),
            });
        }
        match &p.targets {
            Some(t) if t.is_empty() || t.iter().any(|&k| k >= targets.len()) => errors.push(FieldError {
                path: format!("free[{i}].targets"),
                message: "must list existing target indices".into(),
            }),
            _ => {}
        }
    }
    for (i, t) in targets.iter().enumerate() {
        if let Err(Error::Validation(errs)) = validate(&t.config) {
            errors.extend(errs.into_iter().map(|e| FieldError {
                path: format!("targets[{i}].config.{}", e.path),
                message: e.message,
            }));
        }
        if !(t.value.is_finite() && t.value != 0.0) {
            errors.push(FieldError {
                path: format!("targets[{i}].value"),
                message: "must be finite and non-zero".into(),
            });
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    if targets.is_empty() {
        return Err(Error::Validation(vec![FieldError {
            path: "targets".into(),
            message: "at least one target".into(),
        }]));
    }
    let x0: Vec<f64> = free
        .iter()
        .map(|p| {
            let first = (0..targets.len()).find(|&k| p.applies_to(k)).unwrap_or(0);
            get_number(&targets[first].config, &p.path).map(|v| v.clamp(p.lower, p.upper))
        })
        .collect::<Result<_>>()?;
    let lower: Vec<f64> = free.iter().map(|p| p.lower).collect();
    let upper: Vec<f64> = free.iter().map(|p| p.upper).collect();
    let step: Vec<f64> = x0
        .iter()
        .zip(free)
        .map(|(x, p)| (0.1 * x.abs()).max(0.05 * (p.upper - p.lower)).min(0.5 * (p.upper - p.lower)))
        .collect();
    let initial_objective = objective(targets, &residuals(free, targets, &x0));
    let result = nelder_mead(
        |x| objective(targets, &residuals(free, targets, x)),
        &x0,
        &step,
        &lower,
        &upper,
        max_evals,
    );
    let r = residuals(free, targets, &result.x);
    let names = |x: &[f64]| free.iter().zip(x).map(|(p, v)| (p.path.clone(), *v)).collect();
    Ok(CalibrationResult {
        parameters: names(&result.x),
        initial: names(&x0),
        residuals: r.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        objective: result.value,
        initial_objective,
        evaluations: result.evaluations,
    })
}
