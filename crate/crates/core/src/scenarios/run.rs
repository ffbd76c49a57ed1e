//! Scenario execution: analysis pipeline, property checks and file export.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{config_hash, descriptor, AnalysisOp, BaseConfig, Check, ScenarioDescriptor, DEFAULT_SEED, SEED_ENV, SUMMARY_SCHEMA};
use crate::analysis::barrier::bistable_pair;
use crate::analysis::kinetics::settling_time_constant;
use crate::analysis::oscillation::MIN_AMPLITUDE;
use crate::analysis::switching::trigger_switches;
use crate::analysis::{
    classify_response, compute_barrier, enumerate_states, homeostasis_report, oscillation_metrics, spectrum,
    switching_threshold, ThresholdResult, Window,
};
use crate::dynamics::chain::{signed_seed, ChainConfig};
use crate::dynamics::integrate::{baffle_lean, integrate, simulate, Trace};
use crate::dynamics::steady::{default_seeds, find_steady_states, newton, Seed, SteadySearch};
use crate::dynamics::sweep;
use crate::error::{Error, FieldError, Result};
use crate::model::{mw_cm2_to_w_m2, reverse_state, BodyCoupling, ScenarioConfig};
use crate::optics::{FeedbackSign, ReducedActuator};
use crate::system::System;

/// Largest joint-angle distance, rad, between the start state and the state a
/// sub-threshold trigger relaxes to for the trigger to count as reverted.
pub const REVERT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Explicit seed; falls back to `PHOTOFEEDBACK_SEED`, then 0.
    pub seed: Option<u64>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub metric: String,
    #[serde(flatten)]
    pub check: Check,
    pub observed: Value,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub outputs: Map<String, Value>,
    pub properties: Vec<PropertyResult>,
    pub passed: bool,
    /// Files written next to the summary.
    pub files: Vec<String>,
}

/// A plot-ready table.
#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Panel {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.header.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect(),
        )
    }
}

#[derive(Default)]
struct OpOutput {
    metrics: Vec<(String, Value)>,
    panels: Vec<Panel>,
    traces: Vec<(String, Trace)>,
}

impl OpOutput {
    fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .push((key.into(), serde_json::to_value(value).unwrap_or(Value::Null)));
    }
}

/// `flag`, else `PHOTOFEEDBACK_SEED`, else 0.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::Validation(vec![FieldError {
                path: SEED_ENV.into(),
                message: format!("not an unsigned integer: {v:?}"),
            }])
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

pub fn run_scenario(name: &str, overrides: &[(String, Value)], out_dir: Option<&Path>) -> Result<RunSummary> {
    run_scenario_with(name, overrides, out_dir, &RunOptions::default())
}

pub fn run_scenario_with(
    name: &str,
    overrides: &[(String, Value)],
    out_dir: Option<&Path>,
    options: &RunOptions,
) -> Result<RunSummary> {
    run_descriptor(&descriptor(name)?, overrides, out_dir, options)
}

/// Applies overrides and the seed, validates, runs the pipeline, checks the
/// properties and writes outputs when `out_dir` is given.
pub fn run_descriptor(
    desc: &ScenarioDescriptor,
    overrides: &[(String, Value)],
    out_dir: Option<&Path>,
    options: &RunOptions,
) -> Result<RunSummary> {
    let seed = resolve_seed(options.seed)?;
    let base = desc.base.with_overrides(overrides)?.with_seed(seed);
    base.validate()?;
    let started = Instant::now();
    let mut outputs = Map::new();
    let mut panels = Vec::new();
    let mut traces = Vec::new();
    for op in &desc.pipeline {
        let out = run_op(op, &base)?;
        for (k, v) in out.metrics {
            outputs.insert(format!("{}.{k}", op.name()), v);
        }
        panels.extend(out.panels);
        traces.extend(out.traces);
    }
    let properties: Vec<PropertyResult> = desc
        .properties
        .iter()
        .map(|p| {
            let observed = outputs.get(&p.metric).cloned().unwrap_or(Value::Null);
            PropertyResult {
                metric: p.metric.clone(),
                check: p.check.clone(),
                passed: p.check.holds(&observed),
                observed,
            }
        })
        .collect();
    let mut summary = RunSummary {
        schema: SUMMARY_SCHEMA,
        scenario: desc.name.clone(),
        config_hash: config_hash(&base)?,
        seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
        passed: properties.iter().all(|p| p.passed),
        properties,
        files: Vec::new(),
    };
    if let Some(dir) = out_dir {
        write_outputs(dir, &mut summary, &panels, &traces, options.format)?;
    }
    Ok(summary)
}

fn write_outputs(
    dir: &Path,
    summary: &mut RunSummary,
    panels: &[Panel],
    traces: &[(String, Trace)],
    format: OutputFormat,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let name = summary.scenario.clone();
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    for (label, trace) in traces {
        let file = format!("{name}_{label}.{ext}");
        let body = match format {
            OutputFormat::Csv => trace.to_csv(),
            OutputFormat::Json => {
                let cols: Map<String, Value> = trace.columns().into_iter().map(|(k, v)| (k, json!(v))).collect();
                serde_json::to_string(&cols)?
            }
        };
        std::fs::write(dir.join(&file), body)?;
        summary.files.push(file);
    }
    for panel in panels {
        let file = format!("{name}_{}.{ext}", panel.name);
        let body = match format {
            OutputFormat::Csv => panel.to_csv(),
            OutputFormat::Json => serde_json::to_string_pretty(&panel.to_json())?,
        };
        std::fs::write(dir.join(&file), body)?;
        summary.files.push(file);
    }
    let file = format!("{name}_summary.json");
    summary.files.push(file.clone());
    std::fs::write(dir.join(file), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}

fn wrong_base(op: &AnalysisOp, want: &str) -> Error {
    Error::Validation(vec![FieldError {
        path: "base".into(),
        message: format!("{} needs a {want} config", op.name()),
    }])
}

fn run_op(op: &AnalysisOp, base: &BaseConfig) -> Result<OpOutput> {
    match (op, base) {
        (AnalysisOp::EnumerateStates {
            intensity,
            decoupled_spacing,
        }, BaseConfig::Chain(chain)) => op_enumerate(chain, *intensity, *decoupled_spacing),
        (AnalysisOp::EnumerateStates { .. }, _) => Err(wrong_base(op, "chain")),
        (AnalysisOp::ReducedSweep { values, delta }, BaseConfig::Reduced(r)) => Ok(op_reduced(r, values, *delta)),
        (AnalysisOp::ReducedSweep { .. }, _) => Err(wrong_base(op, "reduced")),
        (_, BaseConfig::Single(cfg)) => run_single(op, cfg),
        _ => Err(wrong_base(op, "single-unit")),
    }
}

fn run_single(op: &AnalysisOp, cfg: &ScenarioConfig) -> Result<OpOutput> {
    match op {
        AnalysisOp::ResponseSweep { values } => op_sweep(cfg, values),
        AnalysisOp::SteadyStates => op_steady(cfg),
        AnalysisOp::KineticTau => op_kinetics(cfg),
        AnalysisOp::Barriers { intensities } => op_barriers(cfg, intensities),
        AnalysisOp::SwitchingThresholds {
            fuels,
            fuel_ladder_duration,
            durations,
            duration_ladder_fuel,
            cap,
            sub_threshold_fraction,
        } => op_switching(
            cfg,
            fuels,
            *fuel_ladder_duration,
            durations,
            *duration_ladder_fuel,
            *cap,
            *sub_threshold_fraction,
        ),
        AnalysisOp::Oscillation {
            intensity_factors,
            quiescent_factor,
        } => op_oscillation(cfg, intensity_factors, *quiescent_factor),
        AnalysisOp::Homeostasis { on, off } => op_homeostasis(cfg, *on, *off),
        AnalysisOp::Locomotion {
            intensities,
            swapped_friction,
            symmetric_friction,
        } => op_locomotion(cfg, intensities, *swapped_friction, *symmetric_friction),
        AnalysisOp::EnumerateStates { .. } | AnalysisOp::ReducedSweep { .. } => unreachable!("dispatched by base kind"),
    }
}

fn op_sweep(cfg: &ScenarioConfig, values: &[f64]) -> Result<OpOutput> {
    let curve = sweep(cfg, values)?;
    let class = classify_response(&curve.intensity, &curve.delta_alpha)?;
    let mut out = OpOutput::default();
    out.metric("class", class.class);
    out.metric("r_squared", class.r_squared);
    out.metric("slope_ratio", class.slope_ratio);
    out.metric("initial_slope", class.initial_slope);
    out.metric("end_slope", class.end_slope);
    out.metric("fold", curve.fold);
    out.metric("grid", values);
    let mut panel = Panel::new(
        "response",
        &["intensity_mw_cm2", "delta_alpha_rad", "d_m", "curvature_1_m", "power_W"],
    );
    for i in 0..curve.len() {
        panel.rows.push(vec![
            json!(curve.intensity[i]),
            json!(curve.delta_alpha[i]),
            json!(curve.d[i]),
            json!(curve.curvature[i]),
            json!(curve.power[i]),
        ]);
    }
    out.panels.push(panel);
    Ok(out)
}

/// Largest distance between the mirror image of a steady state and the
/// nearest state found from mirrored seeds: angles in rad, temperatures
/// relative to the largest rise over ambient.
fn mirror_error(system: &System, cfg: &ScenarioConfig, found: &SteadySearch) -> f64 {
    let base = cfg.geometry.base;
    let mirrored: Vec<Seed> = default_seeds(system)
        .into_iter()
        .map(|s| Seed {
            label: format!("mirror {}", s.label),
            state: reverse_state(&s.state, &base),
        })
        .collect();
    let images = find_steady_states(system, &mirrored, 0.0);
    let t_amb = cfg.material.ambient_temperature;
    let rise = found
        .states
        .iter()
        .flat_map(|s| s.state.temperature.iter())
        .map(|t| t - t_amb)
        .fold(1e-12, f64::max);
    let distance = |a: &crate::model::SystemState, b: &crate::model::SystemState| {
        let th = a.theta.iter().zip(&b.theta).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let te = a
            .temperature
            .iter()
            .zip(&b.temperature)
            .map(|(x, y)| (x - y).abs() / rise)
            .fold(0.0, f64::max);
        th.max(te)
    };
    if images.states.len() != found.states.len() {
        return f64::INFINITY;
    }
    found
        .states
        .iter()
        .map(|s| {
            let r = reverse_state(&s.state, &base);
            images
                .states
                .iter()
                .map(|m| distance(&r, &m.state))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn op_steady(cfg: &ScenarioConfig) -> Result<OpOutput> {
    let system = System::new(cfg)?;
    let search = find_steady_states(&system, &default_seeds(&system), 0.0);
    let mut out = OpOutput::default();
    out.metric("stable_count", search.stable().len());
    out.metric("unstable_count", search.unstable().len());
    let err = mirror_error(&system, cfg, &search);
    out.metric("mirror_error", if err.is_finite() { json!(err) } else { Value::Null });
    let mut panel = Panel::new("steady_states", &["baffle_lean_m", "stability", "leading_real_1_s"]);
    for s in &search.states {
        panel.rows.push(vec![
            json!(baffle_lean(&system, 0, &s.state)),
            serde_json::to_value(s.stability)?,
            json!(s.leading_real),
        ]);
    }
    out.panels.push(panel);
    Ok(out)
}

fn op_kinetics(cfg: &ScenarioConfig) -> Result<OpOutput> {
    let system = System::new(cfg)?;
    let initial = signed_seed(&system, &[-1]);
    let trace = simulate(&system, &initial, &cfg.integrator)?;
    let tau = settling_time_constant(&trace.time, &trace.units[0].baffle_dx)?;
    let mut out = OpOutput::default();
    out.metric("tau_s", tau);
    out.metric("thermal_time_constant_s", cfg.material.thermal_time_constant());
    out.metric("fuel_mw_cm2", cfg.fuel_intensity_mw_cm2());
    out.traces.push(("trace".into(), trace));
    Ok(out)
}

fn op_barriers(cfg: &ScenarioConfig, intensities: &[f64]) -> Result<OpOutput> {
    let results = intensities
        .iter()
        .map(|i| compute_barrier(cfg, *i))
        .collect::<Result<Vec<_>>>()?;
    let b12: Vec<f64> = results.iter().map(|b| b.barrier_1to2).collect();
    let b21: Vec<f64> = results.iter().map(|b| b.barrier_2to1).collect();
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let asym = b12
        .iter()
        .zip(&b21)
        .map(|(a, b)| (a - b).abs() / (0.5 * (a + b)))
        .fold(0.0, f64::max);
    let mut out = OpOutput::default();
    out.metric("intensities", intensities);
    out.metric("barrier_1to2_J", &b12);
    out.metric("barrier_2to1_J", &b21);
    out.metric("strictly_increasing", increasing(&b12) && increasing(&b21));
    out.metric("max_asymmetry", asym);
    let mut table = Panel::new(
        "barriers",
        &["intensity_mw_cm2", "barrier_1to2_J", "barrier_2to1_J", "fold_force_1to2_N", "fold_force_2to1_N"],
    );
    let mut paths = Panel::new("barrier_paths", &["intensity_mw_cm2", "direction", "displacement_m", "force_N"]);
    for (i, b) in intensities.iter().zip(&results) {
        table.rows.push(vec![
            json!(i),
            json!(b.barrier_1to2),
            json!(b.barrier_2to1),
            json!(b.fold_force_1to2),
            json!(b.fold_force_2to1),
        ]);
        for (dir, path) in [("1to2", &b.path_1to2), ("2to1", &b.path_2to1)] {
            for (d, f) in path {
                paths.rows.push(vec![json!(i), json!(dir), json!(d), json!(f)]);
            }
        }
    }
    out.panels.push(table);
    out.panels.push(paths);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn op_switching(
    cfg: &ScenarioConfig,
    fuels: &[f64],
    fuel_ladder_duration: f64,
    durations: &[f64],
    duration_ladder_fuel: f64,
    cap: f64,
    sub_fraction: f64,
) -> Result<OpOutput> {
    let mut cache: HashMap<(u64, u64), ThresholdResult> = HashMap::new();
    let mut threshold = |fuel: f64, duration: f64| -> Result<ThresholdResult> {
        let key = (fuel.to_bits(), duration.to_bits());
        if let Some(r) = cache.get(&key) {
            return Ok(r.clone());
        }
        let r = switching_threshold(cfg, fuel, duration, cap)?;
        cache.insert(key, r.clone());
        Ok(r)
    };
    let by_fuel = fuels
        .iter()
        .map(|f| threshold(*f, fuel_ladder_duration))
        .collect::<Result<Vec<_>>>()?;
    let by_duration = durations
        .iter()
        .map(|d| threshold(duration_ladder_fuel, *d))
        .collect::<Result<Vec<_>>>()?;
    let reference = threshold(duration_ladder_fuel, fuel_ladder_duration)?;
    let values = |rs: &[ThresholdResult]| rs.iter().map(|r| r.threshold).collect::<Option<Vec<f64>>>();
    let fuel_values = values(&by_fuel);
    let duration_values = values(&by_duration);
    let mut out = OpOutput::default();
    out.metric("fuels", fuels);
    out.metric("fuel_ladder_thresholds", by_fuel.iter().map(|r| r.threshold).collect::<Vec<_>>());
    out.metric("durations", durations);
    out.metric(
        "duration_ladder_thresholds",
        by_duration.iter().map(|r| r.threshold).collect::<Vec<_>>(),
    );
    out.metric("all_found", fuel_values.is_some() && duration_values.is_some());
    out.metric(
        "fuel_nondecreasing",
        fuel_values.as_ref().is_some_and(|v| v.windows(2).all(|w| w[1] >= w[0])),
    );
    out.metric(
        "duration_nonincreasing",
        duration_values.as_ref().is_some_and(|v| v.windows(2).all(|w| w[1] <= w[0])),
    );
    let reverts = match reference.threshold {
        Some(thr) => {
            let mut fuelled = cfg.clone();
            fuelled.set_fuel_intensity(duration_ladder_fuel);
            let system = System::new(&fuelled)?;
            let (start, _) = bistable_pair(&system)?;
            let (switched, end) = trigger_switches(&fuelled, &start, sub_fraction * thr, fuel_ladder_duration)?;
            // the pulse window ends before full relaxation; finish with Newton
            let settled = newton(&system, &end, 0.0, false).map(|r| r.0).unwrap_or(end);
            let gap = settled
                .theta
                .iter()
                .zip(&start.theta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            out.metric("sub_threshold_trigger_mw_cm2", sub_fraction * thr);
            out.metric("sub_threshold_final_gap_rad", gap);
            !switched && gap < REVERT_TOLERANCE
        }
        None => false,
    };
    out.metric("sub_threshold_reverts", reverts);
    let mut panel = Panel::new("thresholds", &["fuel_mw_cm2", "duration_s", "threshold_mw_cm2", "trials"]);
    for r in by_fuel.iter().chain(&by_duration) {
        panel
            .rows
            .push(vec![json!(r.fuel), json!(r.duration), json!(r.threshold), json!(r.trials)]);
    }
    out.panels.push(panel);
    Ok(out)
}

fn op_enumerate(chain: &ChainConfig, intensity: f64, decoupled: Option<f64>) -> Result<OpOutput> {
    let set = enumerate_states(chain, intensity)?;
    let mut out = OpOutput::default();
    out.metric("unit_count", set.unit_count);
    out.metric("observed", &set.observed);
    out.metric("forbidden", &set.forbidden);
    out.metric("unresolved", &set.unresolved);
    out.metric("observed_count", set.observed.len());
    out.metric("forbidden_count", set.forbidden.len());
    let mut panel = Panel::new("configurations", &["spacing_m", "seed", "configuration", "settled"]);
    let mut push = |spacing: f64, set: &crate::analysis::StableConfigurationSet| {
        for o in &set.outcomes {
            panel
                .rows
                .push(vec![json!(spacing), json!(o.seed), json!(o.configuration), json!(o.settled)]);
        }
    };
    push(chain.spacing, &set);
    if let Some(spacing) = decoupled {
        let mut far = chain.clone();
        far.spacing = spacing;
        let control = enumerate_states(&far, intensity)?;
        out.metric("decoupled_spacing_m", spacing);
        out.metric("decoupled_observed", &control.observed);
        out.metric("decoupled_observed_count", control.observed.len());
        push(spacing, &control);
    }
    out.panels.push(panel);
    Ok(out)
}

fn op_oscillation(cfg: &ScenarioConfig, factors: &[f64], quiescent: Option<f64>) -> Result<OpOutput> {
    let trace = integrate(cfg, None)?;
    let m = oscillation_metrics(&trace.time, trace.d())?;
    let mut out = OpOutput::default();
    let limit_cycle = m.f1.is_some() && m.amplitude > MIN_AMPLITUDE;
    out.metric("limit_cycle", limit_cycle);
    out.metric("f1_hz", m.f1);
    out.metric("amplitude_m", m.amplitude);
    out.metric("dc_m", m.dc);
    out.metric("converged", m.converged);
    out.metric("intensity_mw_cm2", cfg.fuel_intensity_mw_cm2());
    let mut ladder = Panel::new("intensity_ladder", &["intensity_mw_cm2", "f1_hz", "amplitude_m", "dc_m"]);
    ladder.rows.push(vec![
        json!(cfg.fuel_intensity_mw_cm2()),
        json!(m.f1),
        json!(m.amplitude),
        json!(m.dc),
    ]);
    let mut variation: f64 = 0.0;
    for f in factors {
        let mut scaled = cfg.clone();
        scaled.scale_fuel(*f);
        let t = integrate(&scaled, None)?;
        let mf = oscillation_metrics(&t.time, t.d())?;
        variation = variation.max(match (m.f1, mf.f1) {
            (Some(a), Some(b)) => (b / a - 1.0).abs(),
            _ => 1.0,
        });
        ladder.rows.push(vec![
            json!(scaled.fuel_intensity_mw_cm2()),
            json!(mf.f1),
            json!(mf.amplitude),
            json!(mf.dc),
        ]);
    }
    out.metric("f1_variation", variation);
    if let Some(q) = quiescent {
        let mut dim = cfg.clone();
        dim.scale_fuel(q);
        let t = integrate(&dim, None)?;
        let mq = oscillation_metrics(&t.time, t.d())?;
        out.metric("quiescent_amplitude_m", mq.amplitude);
        out.metric(
            "quiescent_below_threshold",
            mq.f1.is_none() || mq.amplitude <= MIN_AMPLITUDE,
        );
    }
    let half = trace.time.len() / 2;
    let s = spectrum(&trace.time[half..], &trace.d()[half..], Window::Hann)?;
    let mut panel = Panel::new("spectrum", &["frequency_Hz", "amplitude_m"]);
    for (f, a) in s.frequency.iter().zip(&s.amplitude) {
        panel.rows.push(vec![json!(f), json!(a)]);
    }
    out.panels.push(ladder);
    out.panels.push(panel);
    out.traces.push(("trace".into(), trace));
    Ok(out)
}

fn op_homeostasis(cfg: &ScenarioConfig, on: f64, off: f64) -> Result<OpOutput> {
    let trace = integrate(cfg, None)?;
    let report = homeostasis_report(&trace.time, trace.d(), on, off)?;
    let mut out = OpOutput::default();
    out.metric("drift", report.drift);
    out.metric("f1_change", report.f1_change);
    let mut panel = Panel::new("phases", &["phase", "start_s", "end_s", "dc_m", "f1_hz", "amplitude_m"]);
    for p in &report.phases {
        out.metric(&format!("{}_f1_hz", p.name), p.f1);
        out.metric(&format!("{}_dc_m", p.name), p.dc);
        panel.rows.push(vec![
            json!(p.name),
            json!(p.start),
            json!(p.end),
            json!(p.dc),
            json!(p.f1),
            json!(p.amplitude),
        ]);
    }
    out.panels.push(panel);
    out.traces.push(("trace".into(), trace));
    Ok(out)
}

struct Gait {
    speed: f64,
    f1: Option<f64>,
    amplitude: f64,
}

/// Mean body speed over the second half of the run, and the tip oscillation.
fn gait(cfg: &ScenarioConfig) -> Result<(Gait, Trace)> {
    let trace = integrate(cfg, None)?;
    let n = trace.body_x.len();
    if n < 2 {
        return Err(Error::Validation(vec![FieldError {
            path: "body".into(),
            message: "locomotion needs a body coupling".into(),
        }]));
    }
    let h = n / 2;
    let speed = (trace.body_x[n - 1] - trace.body_x[h]) / (trace.time[n - 1] - trace.time[h]);
    let m = oscillation_metrics(&trace.time, trace.d())?;
    Ok((
        Gait {
            speed,
            f1: m.f1,
            amplitude: m.amplitude,
        },
        trace,
    ))
}

fn with_friction(cfg: &ScenarioConfig, pick: impl Fn(f64, f64) -> (f64, f64)) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    match &mut c.body {
        BodyCoupling::Crawler {
            friction_forward,
            friction_backward,
            ..
        } => {
            let (f, b) = pick(*friction_forward, *friction_backward);
            *friction_forward = f;
            *friction_backward = b;
            Ok(c)
        }
        _ => Err(Error::Validation(vec![FieldError {
            path: "body".into(),
            message: "friction controls need a crawler body".into(),
        }])),
    }
}

fn op_locomotion(cfg: &ScenarioConfig, intensities: &[f64], swapped: bool, symmetric: bool) -> Result<OpOutput> {
    let mut out = OpOutput::default();
    let mut panel = Panel::new("speed", &["intensity_mw_cm2", "speed_m_s", "f1_hz", "amplitude_m"]);
    let mut gaits = Vec::new();
    let mut last = None;
    for i in intensities {
        let mut c = cfg.clone();
        c.set_fuel_intensity(*i);
        let (g, trace) = gait(&c)?;
        panel
            .rows
            .push(vec![json!(i), json!(g.speed), json!(g.f1), json!(g.amplitude)]);
        gaits.push(g);
        last = Some((c, trace));
    }
    let speeds: Vec<f64> = gaits.iter().map(|g| g.speed).collect();
    let f1: Option<Vec<f64>> = gaits.iter().map(|g| g.f1).collect();
    out.metric("intensities", intensities);
    out.metric("speeds_m_s", &speeds);
    out.metric("f1_hz", gaits.iter().map(|g| g.f1).collect::<Vec<_>>());
    out.metric("speed_strictly_increasing", speeds.windows(2).all(|w| w[1] > w[0]));
    if let Some(f) = &f1 {
        let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.iter().copied().fold(0.0, f64::max);
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        out.metric("f1_min_hz", lo);
        out.metric("f1_max_hz", hi);
        out.metric("f1_spread", (hi - lo) / mean);
    }
    out.panels.push(panel);
    let Some((reference, trace)) = last else {
        return Ok(out);
    };
    let ref_speed = speeds[speeds.len() - 1];
    if swapped {
        let (g, _) = gait(&with_friction(&reference, |f, b| (b, f))?)?;
        out.metric("swapped_speed_m_s", g.speed);
        out.metric("swapped_reverses", g.speed * ref_speed < 0.0);
    }
    if symmetric {
        let (g, _) = gait(&with_friction(&reference, |f, b| (0.5 * (f + b), 0.5 * (f + b)))?)?;
        out.metric("symmetric_speed_m_s", g.speed);
        let drift = match g.f1 {
            Some(f) if g.amplitude > 0.0 => json!(g.speed.abs() / (f * g.amplitude)),
            _ => Value::Null,
        };
        out.metric("symmetric_drift_per_cycle", drift);
    }
    out.traces.push(("trace".into(), trace));
    Ok(out)
}

fn sign_name(s: FeedbackSign) -> &'static str {
    match s {
        FeedbackSign::Positive => "positive",
        FeedbackSign::Negative => "negative",
        FeedbackSign::None => "none",
    }
}

/// Signs with `none` dropped and repeats collapsed, joined by `_then_`.
pub fn sign_pattern(signs: &[FeedbackSign]) -> String {
    let mut runs: Vec<&str> = Vec::new();
    for s in signs.iter().filter(|s| **s != FeedbackSign::None) {
        let n = sign_name(*s);
        if runs.last() != Some(&n) {
            runs.push(n);
        }
    }
    if runs.is_empty() {
        "none".into()
    } else {
        runs.join("_then_")
    }
}

fn op_reduced(actuator: &ReducedActuator, values: &[f64], delta: f64) -> OpOutput {
    let mut out = OpOutput::default();
    let mut panel = Panel::new(
        "reduced_sweep",
        &["intensity_mw_cm2", "deformation_rad", "power_W", "feedback_sign"],
    );
    let mut deformation = Vec::new();
    let mut signs = Vec::new();
    for v in values {
        let w = mw_cm2_to_w_m2(*v);
        let q = actuator.steady(w);
        let s = actuator.feedback_sign(w, mw_cm2_to_w_m2(delta));
        panel.rows.push(vec![
            json!(v),
            json!(q),
            json!(actuator.steady_power(w)),
            json!(sign_name(s)),
        ]);
        deformation.push(q);
        signs.push(s);
    }
    let slopes: Vec<f64> = values
        .windows(2)
        .zip(deformation.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    let max_slope = slopes.iter().copied().fold(0.0, f64::max);
    let plateau = match slopes.last() {
        Some(s) if max_slope > 0.0 => json!(s / max_slope),
        _ => Value::Null,
    };
    out.metric("deformation_rad", &deformation);
    out.metric("signs", signs.iter().map(|s| sign_name(*s)).collect::<Vec<_>>());
    out.metric("pattern", sign_pattern(&signs));
    out.metric("plateau_ratio", plateau);
    out.panels.push(panel);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns() {
        use FeedbackSign::*;
        assert_eq!(sign_pattern(&[None, Positive, Positive, None, Negative]), "positive_then_negative");
        assert_eq!(sign_pattern(&[Negative, Positive]), "negative_then_positive");
        assert_eq!(sign_pattern(&[None]), "none");
    }

    #[test]
    fn panel_csv() {
        let mut p = Panel::new("x", &["a", "b"]);
        p.rows.push(vec![json!(1.5), json!("L")]);
        p.rows.push(vec![json!(2), Value::Null]);
        assert_eq!(p.to_csv(), "a,b\n1.5,L\n2,\n");
        assert_eq!(p.to_json()[0]["b"], json!("L"));
    }

    #[test]
    fn explicit_seed_wins() {
        assert_eq!(resolve_seed(Some(7)).unwrap(), 7);
    }
}
