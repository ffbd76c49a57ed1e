use crate::error::{Error, Result};
use crate::model::{schedule_edges, BodyState, IntegratorSettings, Method, ScenarioConfig, SystemState};
use crate::system::{perp, unit_vec, Kinematics, System, Unit};
use crate::thermomech::{absorbed_power, full_rhs, Derivatives};

/// Observables of one unit, one entry per sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitSeries {
    /// Tip displacement normal to the base axis, relative to rest, m.
    pub d: Vec<f64>,
    /// Horizontal displacement of the first baffle tip (or the strip tip), m.
    pub baffle_dx: Vec<f64>,
    /// Change of the tip segment angle, rad.
    pub delta_alpha: Vec<f64>,
    /// Mean curvature, 1/m.
    pub curvature: Vec<f64>,
    /// Mean temperature of the first half minus the second half, K.
    pub delta_t_split: Vec<f64>,
    /// Mean temperature rise over ambient, K.
    pub delta_t_mean: Vec<f64>,
    /// Total absorbed power, W.
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub time: Vec<f64>,
    pub states: Vec<SystemState>,
    pub units: Vec<UnitSeries>,
    pub body_x: Vec<f64>,
    pub body_v: Vec<f64>,
}

impl Trace {
    pub fn d(&self) -> &[f64] {
        &self.units[0].d
    }

    pub fn final_state(&self) -> &SystemState {
        self.states.last().expect("trace has at least one sample")
    }

    pub fn sample_interval(&self) -> f64 {
        if self.time.len() < 2 {
            0.0
        } else {
            self.time[1] - self.time[0]
        }
    }

    /// Named columns in CSV order; `t_s` first.
    pub fn columns(&self) -> Vec<(String, Vec<f64>)> {
        let mut cols = vec![("t_s".to_string(), self.time.clone())];
        let multi = self.units.len() > 1;
        for (u, s) in self.units.iter().enumerate() {
            let p = if multi { format!("u{u}_") } else { String::new() };
            cols.push((format!("{p}d_m"), s.d.clone()));
            cols.push((format!("{p}baffle_dx_m"), s.baffle_dx.clone()));
            cols.push((format!("{p}delta_alpha_rad"), s.delta_alpha.clone()));
            cols.push((format!("{p}curvature_1_m"), s.curvature.clone()));
            cols.push((format!("{p}delta_t_split_K"), s.delta_t_split.clone()));
            cols.push((format!("{p}delta_t_mean_K"), s.delta_t_mean.clone()));
            cols.push((format!("{p}power_W"), s.power.clone()));
        }
        if !self.body_x.is_empty() {
            cols.push(("body_x_m".into(), self.body_x.clone()));
            cols.push(("body_v_m_s".into(), self.body_v.clone()));
        }
        let n = self.states.first().map_or(0, |s| s.temperature.len());
        for i in 0..n {
            cols.push((
                format!("T{i}_K"),
                self.states.iter().map(|s| s.temperature[i]).collect(),
            ));
        }
        cols
    }

    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let mut out = cols.iter().map(|c| c.0.as_str()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for r in 0..self.time.len() {
            let row: Vec<String> = cols.iter().map(|c| format!("{}", c.1[r])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn pack(state: &SystemState) -> Vec<f64> {
    let mut y = Vec::with_capacity(3 * state.len() + 2);
    y.extend_from_slice(&state.theta);
    y.extend_from_slice(&state.omega);
    y.extend_from_slice(&state.temperature);
    if let Some(b) = state.body {
        y.push(b.x);
        y.push(b.v);
    }
    y
}

pub(crate) fn unpack(y: &[f64], n: usize, t: f64) -> SystemState {
    SystemState {
        theta: y[..n].to_vec(),
        omega: y[n..2 * n].to_vec(),
        temperature: y[2 * n..3 * n].to_vec(),
        body: (y.len() > 3 * n).then(|| BodyState {
            x: y[3 * n],
            v: y[3 * n + 1],
        }),
        time: t,
    }
}

fn pack_derivatives(d: &Derivatives) -> Vec<f64> {
    let mut y = Vec::with_capacity(3 * d.dtheta.len() + 2);
    y.extend_from_slice(&d.dtheta);
    y.extend_from_slice(&d.domega);
    y.extend_from_slice(&d.dtemp);
    if let Some(b) = d.dbody {
        y.extend_from_slice(&b);
    }
    y
}

/// Packed right-hand side with the non-finite check.
pub(crate) fn rate(system: &System, t: f64, y: &[f64]) -> Result<Vec<f64>> {
    let n = system.segment_count();
    let state = unpack(y, n, t);
    let d = full_rhs(system, &state, t);
    if let Some(segment) = d.first_non_finite() {
        return Err(Error::NonFinite { time: t, segment });
    }
    if !d.is_finite() {
        return Err(Error::NonFinite { time: t, segment: 0 });
    }
    Ok(pack_derivatives(&d))
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_step(system: &System, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = rate(system, t, y)?;
    let k2 = rate(system, t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = rate(system, t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = rate(system, t + h, &axpy(y, h, &k3))?;
    Ok(y
        .iter()
        .enumerate()
        .map(|(i, v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince attempt: returns (5th-order solution, scaled error norm).
fn dp_step(system: &System, t: f64, y: &[f64], h: f64, s: &IntegratorSettings) -> Result<(Vec<f64>, f64)> {
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for stage in 0..7 {
        let mut yi = y.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = A[stage][j];
            if a != 0.0 {
                for (v, d) in yi.iter_mut().zip(kj) {
                    *v += h * a * d;
                }
            }
        }
        k.push(rate(system, t + C[stage] * h, &yi)?);
    }
    let mut y5 = y.to_vec();
    let mut err = 0.0f64;
    for i in 0..y.len() {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for st in 0..7 {
            hi += B5[st] * k[st][i];
            lo += B4[st] * k[st][i];
        }
        y5[i] += h * hi;
        let scale = s.atol + s.rtol * y[i].abs().max(y5[i].abs());
        err = err.max((h * (hi - lo) / scale).abs());
    }
    Ok((y5, err))
}

/// Integrates over `[t0, t1]` without crossing a schedule edge.
fn advance(
    system: &System,
    settings: &IntegratorSettings,
    t0: f64,
    t1: f64,
    y: Vec<f64>,
    h_adapt: &mut f64,
) -> Result<Vec<f64>> {
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(y);
    }
    match settings.method {
        Method::Rk4Fixed => {
            let steps = ((span / settings.dt) - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let mut y = y;
            for k in 0..steps {
                y = rk4_step(system, t0 + k as f64 * h, &y, h)?;
            }
            Ok(y)
        }
        Method::Rk45Adaptive => {
            let mut t = t0;
            let mut y = y;
            let floor = 1e-12 * t1.abs().max(1.0);
            while t < t1 {
                let mut h = h_adapt.min(settings.dt).min(t1 - t);
                let last = t + h >= t1 - floor;
                if last {
                    h = t1 - t;
                }
                if h < floor && !last {
                    return Err(Error::StepUnderflow { time: t });
                }
                let (y_new, err) = dp_step(system, t, &y, h, settings)?;
                if err <= 1.0 {
                    t = if last { t1 } else { t + h };
                    y = y_new;
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    *h_adapt = (h * grow).min(settings.dt);
                } else {
                    *h_adapt = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                    if *h_adapt < floor {
                        return Err(Error::StepUnderflow { time: t });
                    }
                }
            }
            Ok(y)
        }
    }
}

/// All schedule edges of lights and disturbances, sorted.
fn event_times(system: &System) -> Vec<f64> {
    let mut edges: Vec<f64> = system.lights.iter().flat_map(|l| schedule_edges(&l.schedule)).collect();
    for u in &system.units {
        for d in &u.config.disturbances {
            edges.extend(schedule_edges(&d.schedule));
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

/// Integrates `system` from `initial` with uniform sampling every
/// `settings.sample_interval()`; steps are split at schedule edges.
pub fn simulate(system: &System, initial: &SystemState, settings: &IntegratorSettings) -> Result<Trace> {
    let n = system.segment_count();
    let t_start = initial.time;
    let interval = settings.sample_interval();
    let samples = ((settings.t_end - t_start) / interval + 1e-9).floor().max(0.0) as usize;
    let edges = event_times(system);
    let mut recorder = Recorder::new(system);
    let mut y = pack(initial);
    recorder.record(system, unpack(&y, n, t_start));
    let mut h_adapt = settings.dt;
    for k in 0..samples {
        let a = t_start + k as f64 * interval;
        let b = t_start + (k + 1) as f64 * interval;
        let mut t = a;
        for &e in edges.iter().filter(|&&e| e > a && e < b) {
            y = advance(system, settings, t, e, y, &mut h_adapt)?;
            t = e;
        }
        y = advance(system, settings, t, b, y, &mut h_adapt)?;
        recorder.record(system, unpack(&y, n, b));
    }
    Ok(recorder.finish())
}

/// Runs the config's own integrator settings from its rest state, unless
/// `settings` overrides them.
pub fn integrate(config: &ScenarioConfig, settings: Option<&IntegratorSettings>) -> Result<Trace> {
    let system = System::new(config)?;
    let settings = settings.unwrap_or(&system.config().integrator).clone();
    let initial = system.rest.clone();
    simulate(&system, &initial, &settings)
}

struct Recorder {
    rest: Vec<RestRef>,
    trace: Trace,
}

struct RestRef {
    tip: [f64; 2],
    marker_x: f64,
    tip_angle: f64,
}

fn marker_x(kin: &Kinematics) -> f64 {
    kin.baffles.first().map_or_else(|| kin.tip()[0], |b| b.tip[0])
}

/// Horizontal span (tip minus root) of unit `u`'s first baffle, m; the tip
/// deflection along the base normal for units without a baffle. Its sign
/// labels the side a bistable unit has settled on.
pub fn baffle_lean(system: &System, u: usize, state: &SystemState) -> f64 {
    let unit = &system.units[u];
    let kin = unit.kinematics(&state.theta);
    match kin.baffles.first() {
        Some(b) => b.tip[0] - b.root[0],
        None => {
            let g = &unit.config.geometry;
            let normal = perp(unit_vec(g.base.angle));
            let base = unit.base_point();
            let tip = kin.tip();
            (tip[0] - base[0]) * normal[0] + (tip[1] - base[1]) * normal[1]
        }
    }
}

/// Observables of unit `u` at `state`, relative to the system's rest state.
pub fn unit_observables(system: &System, u: usize, state: &SystemState, power: &[f64]) -> [f64; 7] {
    let unit = &system.units[u];
    let rest_kin = unit.kinematics(&system.rest.theta);
    let rest = RestRef {
        tip: rest_kin.tip(),
        marker_x: marker_x(&rest_kin),
        tip_angle: system.rest.theta[unit.range().end - 1],
    };
    observe(unit, &rest, state, power)
}

fn observe(unit: &Unit, rest: &RestRef, state: &SystemState, power: &[f64]) -> [f64; 7] {
    let r = unit.range();
    let theta = &state.theta[r.clone()];
    let kin = Kinematics::new(unit, theta);
    let g = &unit.config.geometry;
    let normal = perp(unit_vec(g.base.angle));
    let tip = kin.tip();
    let d = (tip[0] - rest.tip[0]) * normal[0] + (tip[1] - rest.tip[1]) * normal[1];
    let n = unit.n();
    let ell = unit.ell();
    let curvature = if unit.first_joint() == 0 {
        (theta[n - 1] - g.base.angle) / (n as f64 * ell)
    } else {
        (theta[n - 1] - theta[0]) / ((n - 1) as f64 * ell)
    };
    let temp = &state.temperature[r.clone()];
    let half = n / 2;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let split = mean(&temp[..half]) - mean(&temp[n - half..]);
    [
        d,
        marker_x(&kin) - rest.marker_x,
        theta[n - 1] - rest.tip_angle,
        curvature,
        split,
        mean(temp) - unit.config.material.ambient_temperature,
        power[r].iter().sum(),
    ]
}

impl Recorder {
    fn new(system: &System) -> Self {
        let rest = system
            .units
            .iter()
            .map(|u| {
                let kin = u.kinematics(&system.rest.theta);
                RestRef {
                    tip: kin.tip(),
                    marker_x: marker_x(&kin),
                    tip_angle: system.rest.theta[u.range().end - 1],
                }
            })
            .collect();
        Self {
            rest,
            trace: Trace {
                time: Vec::new(),
                states: Vec::new(),
                units: vec![UnitSeries::default(); system.units.len()],
                body_x: Vec::new(),
                body_v: Vec::new(),
            },
        }
    }

    fn record(&mut self, system: &System, state: SystemState) {
        let power = absorbed_power(system, &state.theta, state.time).power;
        for (u, unit) in system.units.iter().enumerate() {
            let o = observe(unit, &self.rest[u], &state, &power);
            let s = &mut self.trace.units[u];
            s.d.push(o[0]);
            s.baffle_dx.push(o[1]);
            s.delta_alpha.push(o[2]);
            s.curvature.push(o[3]);
            s.delta_t_split.push(o[4]);
            s.delta_t_mean.push(o[5]);
            s.power.push(o[6]);
        }
        if let Some(b) = state.body {
            self.trace.body_x.push(b.x);
            self.trace.body_v.push(b.v);
        }
        self.trace.time.push(state.time);
        self.trace.states.push(state);
    }

    fn finish(self) -> Trace {
        self.trace
    }
}

/// Norm of the state rate `(dθ/dt, dω/dt)`, used as a settling criterion.
pub fn velocity_norm(system: &System, state: &SystemState) -> f64 {
    let d = full_rhs(system, state, state.time);
    d.dtheta
        .iter()
        .chain(&d.domega)
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}
