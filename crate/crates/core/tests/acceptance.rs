//! Acceptance criteria 1-12 plus the calibration self-test. Runs without the
//! libtest harness so each check prints exactly one `PASS`/`FAIL` line; the
//! process fails if any check fails. Optional arguments filter by name.
//!
//! Scenario runs are shared between criteria through a per-name cache.

use std::collections::HashMap;
use std::process::ExitCode;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use photofeedback::analysis::calibrate::{calibrate, FreeParam, Observable, Target};
use photofeedback::dynamics::integrate::integrate;
use photofeedback::dynamics::steady::{jacobian, leading_eigenvalue, unique_steady_state, JACOBIAN_STEP};
use photofeedback::model::{Gust, IntegratorSettings};
use photofeedback::optics::{cast_shadows, Beam, Element, ElementKind, ShadowScene};
use photofeedback::scenarios::calibration::ShippedCalibration;
use photofeedback::scenarios::registry::{oscillator, windy_oscillator};
use photofeedback::scenarios::{run_scenario, RunSummary};
use photofeedback::{ScenarioConfig, System};

// Tolerances.
const LINEAR_R2: f64 = 0.99;
const SATURATING_RATIO: f64 = 0.2;
const SUPERLINEAR_RATIO: f64 = 2.0;
const FIG1E_RUNTIME_S: f64 = 30.0;
const MIRROR_TOL: f64 = 1e-9;
const BARRIER_ASYMMETRY: f64 = 0.01;
const F1_INTENSITY_VARIATION: f64 = 0.05;
const WIND_F1_CHANGE: f64 = 0.02;
const WIND_DC_DRIFT: f64 = 0.15;
const SWIMMER_F1_SPREAD: f64 = 0.10;
const SYMMETRIC_DRIFT: f64 = 0.01;
const ORACLE_FRACTION_TOL: f64 = 0.01;
const ORACLE_SCENES: usize = 100;
const ORACLE_RAYS: usize = 20_000;
const RK4_MIN_ORDER: f64 = 3.7;
const POWER_BALANCE_TOL: f64 = 1e-12;
const JACOBIAN_TOL: f64 = 1e-4;
const OSC_TARGET_HZ: f64 = 3.8;
const OSC_REL: f64 = 0.10;
const TAU_TARGET_S: f64 = 10.0;
const TAU_REL: f64 = 0.20;
const SWIM_TARGET_HZ: f64 = 8.0;
const SWIM_REL: f64 = 0.10;
const CRAWL_BAND_HZ: (f64, f64) = (0.37, 0.59);
const CRAWL_BAND_REL: f64 = 0.30;

type Cell = Arc<OnceLock<RunSummary>>;

fn summary(name: &str) -> &'static RunSummary {
    static CACHE: OnceLock<Mutex<HashMap<String, &'static Cell>>> = OnceLock::new();
    let cell: &'static Cell = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry(name.to_string())
            .or_insert_with(|| Box::leak(Box::new(Arc::new(OnceLock::new()))))
    };
    cell.get_or_init(|| run_scenario(name, &[], None).unwrap_or_else(|e| panic!("{name}: {e}")))
}

fn out(s: &RunSummary, key: &str) -> Value {
    s.outputs.get(key).cloned().unwrap_or(Value::Null)
}

fn num(s: &RunSummary, key: &str) -> f64 {
    out(s, key).as_f64().unwrap_or(f64::NAN)
}

fn flag(s: &RunSummary, key: &str) -> bool {
    out(s, key).as_bool().unwrap_or(false)
}

fn report(n: u32, title: &str, pass: bool, detail: String) {
    println!("criterion {n:02} {title}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} {title}: {detail}");
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn criterion_01_response_trichotomy() {
    let none = summary("fig1e_none");
    let neg = summary("fig1e_negative");
    let pos = summary("fig1e_positive");
    let pass = out(none, "response_sweep.class") == json!("linear")
        && num(none, "response_sweep.r_squared") > LINEAR_R2
        && out(neg, "response_sweep.class") == json!("saturating")
        && num(neg, "response_sweep.slope_ratio") < SATURATING_RATIO
        && out(pos, "response_sweep.class") == json!("superlinear")
        && num(pos, "response_sweep.slope_ratio") > SUPERLINEAR_RATIO
        && [none, neg, pos].iter().all(|s| s.wall_time_s < FIG1E_RUNTIME_S);
    report(
        1,
        "response-curve trichotomy",
        pass,
        format!(
            "none r2 {:.4}, negative ratio {:.3}, positive ratio {:.3}, max runtime {:.1} s",
            num(none, "response_sweep.r_squared"),
            num(neg, "response_sweep.slope_ratio"),
            num(pos, "response_sweep.slope_ratio"),
            [none, neg, pos].iter().map(|s| s.wall_time_s).fold(0.0, f64::max)
        ),
    );
}

fn criterion_02_bistability_and_symmetry() {
    let s = summary("fig2_bistability");
    let stable = out(s, "steady_states.stable_count");
    let unstable = out(s, "steady_states.unstable_count");
    let mirror = num(s, "steady_states.mirror_error");
    let pass = stable == json!(2) && unstable == json!(1) && mirror < MIRROR_TOL;
    report(
        2,
        "bistability and mirror symmetry",
        pass,
        format!("stable {stable}, unstable {unstable}, mirror error {mirror:.2e}"),
    );
}

fn criterion_03_barrier_monotonicity() {
    let s = summary("fig2_barriers");
    let pass = flag(s, "barriers.strictly_increasing") && num(s, "barriers.max_asymmetry") < BARRIER_ASYMMETRY;
    report(
        3,
        "barrier monotonicity",
        pass,
        format!(
            "barriers {} J, asymmetry {:.2e}",
            out(s, "barriers.barrier_1to2_J"),
            num(s, "barriers.max_asymmetry")
        ),
    );
}

fn criterion_04_switching_monotonicity() {
    let s = summary("fig2_switching");
    let pass = flag(s, "switching_thresholds.all_found")
        && flag(s, "switching_thresholds.fuel_nondecreasing")
        && flag(s, "switching_thresholds.duration_nonincreasing")
        && flag(s, "switching_thresholds.sub_threshold_reverts");
    report(
        4,
        "switching monotonicity",
        pass,
        format!(
            "by fuel {}, by duration {}, sub-threshold reverts {}",
            out(s, "switching_thresholds.fuel_ladder_thresholds"),
            out(s, "switching_thresholds.duration_ladder_thresholds"),
            flag(s, "switching_thresholds.sub_threshold_reverts")
        ),
    );
}

fn criterion_05_multistability_with_forbidden_states() {
    let two = summary("fig2_chain2");
    let three = summary("fig2_chain3");
    let count = |s, k: &str| out(s, &format!("enumerate_states.{k}"));
    let pass = count(two, "observed_count") == json!(3)
        && count(two, "forbidden_count") == json!(1)
        && count(three, "observed_count") == json!(5)
        && count(two, "decoupled_observed_count") == json!(4)
        && count(three, "decoupled_observed_count") == json!(8);
    report(
        5,
        "multistability with forbidden states",
        pass,
        format!(
            "2 units {} forbidden {}, 3 units {}, decoupled {} / {}",
            count(two, "observed"),
            count(two, "forbidden"),
            count(three, "observed"),
            count(two, "decoupled_observed_count"),
            count(three, "decoupled_observed_count")
        ),
    );
}

fn criterion_06_self_oscillation_structure() {
    let osc = summary("fig3_oscillator");
    let wind = summary("fig3_wind");
    let pass = flag(osc, "oscillation.limit_cycle")
        && flag(osc, "oscillation.quiescent_below_threshold")
        && num(osc, "oscillation.f1_variation") < F1_INTENSITY_VARIATION
        && num(wind, "homeostasis.f1_change") < WIND_F1_CHANGE
        && num(wind, "homeostasis.drift") < WIND_DC_DRIFT;
    report(
        6,
        "self-oscillation structure",
        pass,
        format!(
            "f1 {:.3} Hz, variation over +-50% {:.3}, quiet at 0.1x {}, wind f1 change {:.4}, DC drift {:.3}",
            num(osc, "oscillation.f1_hz"),
            num(osc, "oscillation.f1_variation"),
            flag(osc, "oscillation.quiescent_below_threshold"),
            num(wind, "homeostasis.f1_change"),
            num(wind, "homeostasis.drift")
        ),
    );
}

fn criterion_07_locomotion_monotonicity() {
    let crawl = summary("fig3_crawler");
    let swim = summary("fig3_swimmer");
    let pass = flag(crawl, "locomotion.speed_strictly_increasing")
        && flag(crawl, "locomotion.swapped_reverses")
        && num(crawl, "locomotion.symmetric_drift_per_cycle") < SYMMETRIC_DRIFT
        && flag(swim, "locomotion.speed_strictly_increasing")
        && num(swim, "locomotion.f1_spread") < SWIMMER_F1_SPREAD;
    report(
        7,
        "locomotion monotonicity",
        pass,
        format!(
            "crawler {} m/s, swapped {:.2e}, symmetric drift/cycle {:.2e}; swimmer {} m/s, f1 spread {:.3}",
            out(crawl, "locomotion.speeds_m_s"),
            num(crawl, "locomotion.swapped_speed_m_s"),
            num(crawl, "locomotion.symmetric_drift_per_cycle"),
            out(swim, "locomotion.speeds_m_s"),
            num(swim, "locomotion.f1_spread")
        ),
    );
}

fn criterion_08_self_shadowing_reduced_modes() {
    let names = ["fig4_bend", "fig4_twist", "fig4_spring"];
    let pass = names.iter().all(|n| summary(n).passed);
    let detail = names
        .iter()
        .map(|n| {
            let s = summary(n);
            format!(
                "{n} {} plateau {:.2}",
                out(s, "reduced_sweep.pattern"),
                num(s, "reduced_sweep.plateau_ratio")
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    report(8, "non-monotonic self-shadowing", pass, detail);
}

/// Stratified rays across each element's own transverse extent; a ray counts
/// when that element is the nearest one along the beam.
fn monte_carlo_fractions(scene: &ShadowScene, rays: usize) -> Vec<f64> {
    let d = scene.beam.direction;
    let n = scene.beam.transverse();
    let dot = |p: [f64; 2], v: [f64; 2]| p[0] * v[0] + p[1] * v[1];
    let depth_at = |e: &Element, u: f64| {
        let (ua, ub) = (dot(e.a, n), dot(e.b, n));
        let (u0, u1) = (ua.min(ub), ua.max(ub));
        if u1 - u0 <= 0.0 || u < u0 || u > u1 {
            return None;
        }
        let s = (u - ua) / (ub - ua);
        Some(dot(e.a, d) + s * (dot(e.b, d) - dot(e.a, d)))
    };
    let [lo, hi] = scene.beam.aperture;
    scene
        .elements
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (ua, ub) = (dot(e.a, n), dot(e.b, n));
            let (u0, u1) = (ua.min(ub), ua.max(ub));
            if u1 - u0 <= 0.0 {
                return 0.0;
            }
            let hits = (0..rays)
                .filter(|k| {
                    let u = u0 + (*k as f64 + 0.5) / rays as f64 * (u1 - u0);
                    if u < lo || u > hi {
                        return false;
                    }
                    let mine = depth_at(e, u).unwrap_or(f64::INFINITY);
                    scene
                        .elements
                        .iter()
                        .enumerate()
                        .all(|(j, f)| j == i || depth_at(f, u).is_none_or(|dj| dj > mine || (dj == mine && j > i)))
                })
                .count();
            hits as f64 / rays as f64
        })
        .collect()
}

fn random_scene(rng: &mut ChaCha8Rng) -> ShadowScene {
    let count = rng.random_range(2..=6);
    let elements = (0..count)
        .map(|i| {
            let a = [rng.random_range(0.0..1e-3), rng.random_range(0.0..1e-3)];
            let len = rng.random_range(1e-4..5e-4);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let b = [a[0] + len * phi.cos(), a[1] + len * phi.sin()];
            let kind = if rng.random_bool(0.5) {
                ElementKind::Absorber {
                    segment: i,
                    absorptance: rng.random_range(0.2..1.0),
                    width: 1e-3,
                }
            } else {
                ElementKind::Blocker { id: i, width: 1e-3 }
            };
            Element { a, b, kind }
        })
        .collect();
    let psi: f64 = rng.random_range(-1.2..1.2);
    ShadowScene {
        elements,
        beam: Beam {
            direction: [psi.sin(), -psi.cos()],
            aperture: [-3e-3, 3e-3],
            intensity: 1000.0,
        },
    }
}

/// Bare horizontal cantilever under a beam covering it: smooth dynamics for
/// the convergence study.
fn smooth_cantilever() -> ScenarioConfig {
    let mut c = oscillator(&ShippedCalibration::identity());
    c.baffles.clear();
    c.set_fuel_intensity(300.0);
    c
}

fn rk4_order() -> f64 {
    let cfg = smooth_cantilever();
    let t_end = 0.02;
    let final_theta = |steps: usize| {
        let settings = IntegratorSettings {
            dt: t_end / steps as f64,
            t_end,
            sample_stride: steps,
            ..cfg.integrator.clone()
        };
        integrate(&cfg, Some(&settings)).unwrap().final_state().theta.clone()
    };
    let coarse = (t_end / cfg.max_stable_dt()).ceil() as usize;
    let reference = final_theta(coarse * 64);
    let err = |steps| {
        final_theta(steps)
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(coarse), err(2 * coarse), err(4 * coarse));
    (e1 / e2).log2().min((e2 / e3).log2())
}

fn jacobian_consistency() -> f64 {
    let mut worst: f64 = 0.0;
    let cal = ShippedCalibration::identity();
    for cfg in [oscillator(&cal), smooth_cantilever()] {
        let system = System::new(&cfg).unwrap();
        let state = unique_steady_state(&system, 0.0).unwrap().state;
        let a = jacobian(&system, &state, 0.0, JACOBIAN_STEP);
        let b = jacobian(&system, &state, 0.0, 10.0 * JACOBIAN_STEP);
        worst = worst.max((&a - &b).norm() / a.norm());
        let (re, im) = leading_eigenvalue(&system, &state, 0.0);
        assert!(re.is_finite() && im.is_finite());
    }
    worst
}

fn reruns_identical() -> bool {
    let mut cfg = windy_oscillator(&ShippedCalibration::identity(), 0.0, 2.0);
    cfg.disturbances[0].gust = Some(Gust { fraction: 0.3, interval: 0.05 });
    cfg.integrator.t_end = 2.0;
    cfg.seed = 11;
    let a = integrate(&cfg, None).unwrap().to_csv();
    let b = integrate(&cfg, None).unwrap().to_csv();
    cfg.seed = 12;
    let c = integrate(&cfg, None).unwrap().to_csv();
    a == b && a != c
}

fn criterion_09_numerical_hygiene() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_fraction: f64 = 0.0;
    let mut worst_balance: f64 = 0.0;
    for _ in 0..ORACLE_SCENES {
        let scene = random_scene(&mut rng);
        let r = cast_shadows(&scene, 1e-9);
        let mc = monte_carlo_fractions(&scene, ORACLE_RAYS);
        for (x, y) in r.fraction.iter().zip(&mc) {
            worst_fraction = worst_fraction.max((x - y).abs());
        }
        worst_balance = worst_balance.max(r.balance_error());
    }
    let order = rk4_order();
    let jac = jacobian_consistency();
    let identical = reruns_identical();
    let pass = worst_fraction <= ORACLE_FRACTION_TOL
        && worst_balance <= POWER_BALANCE_TOL
        && order >= RK4_MIN_ORDER
        && jac <= JACOBIAN_TOL
        && identical;
    report(
        9,
        "numerical hygiene",
        pass,
        format!(
            "oracle max fraction error {worst_fraction:.2e} over {ORACLE_SCENES} scenes, power balance {worst_balance:.1e}, \
             RK4 order {order:.2}, Jacobian step consistency {jac:.1e}, bit-identical reruns {identical}"
        ),
    );
}

fn calibration_self_test() {
    // Inverse crime: recover a known stiffness from its own linear frequency.
    let mut truth = oscillator(&ShippedCalibration::identity());
    truth.material.joint_stiffness = 2.7e-6;
    let value = Observable::LinearFrequency.extract(&truth).unwrap();
    let mut start = truth.clone();
    start.material.joint_stiffness = 1.8e-6;
    let free = [FreeParam {
        path: "material.joint_stiffness".into(),
        lower: 1e-6,
        upper: 4e-6,
        targets: None,
    }];
    let targets = [Target {
        config: start,
        observable: Observable::LinearFrequency,
        value,
        weight: 1.0,
    }];
    let r = calibrate(&free, &targets, 80).unwrap();
    let k = r.parameters[0].1;
    let shipped = ShippedCalibration::shipped();
    let pass = (k / 2.7e-6 - 1.0).abs() < 1e-3
        && r.objective * 10.0 <= r.initial_objective
        && shipped.objective * 10.0 <= shipped.initial_objective;
    println!(
        "calibration self-test: {} (recovered k {k:.4e} vs 2.7e-6, objective {:.1e} -> {:.1e}; shipped {:.1e} -> {:.1e})",
        if pass { "PASS" } else { "FAIL" },
        r.initial_objective,
        r.objective,
        shipped.initial_objective,
        shipped.objective
    );
    assert!(pass);
}

fn criterion_10_oscillation_frequency() {
    let f = num(summary("fig3_oscillator"), "oscillation.f1_hz");
    report(
        10,
        "calibrated oscillation frequency",
        within(f, OSC_TARGET_HZ, OSC_REL),
        format!("f1 {f:.3} Hz, target {OSC_TARGET_HZ} Hz +-{:.0}%", OSC_REL * 100.0),
    );
}

fn criterion_11_kinetic_time_constant() {
    let tau = num(summary("fig2_kinetics"), "kinetic_tau.tau_s");
    report(
        11,
        "calibrated settling time constant",
        within(tau, TAU_TARGET_S, TAU_REL),
        format!("tau {tau:.2} s, target {TAU_TARGET_S} s +-{:.0}%", TAU_REL * 100.0),
    );
}

fn criterion_12_locomotion_frequencies() {
    let swim = summary("fig3_swimmer");
    let crawl = summary("fig3_crawler");
    let freqs = |s| {
        out(s, "locomotion.f1_hz")
            .as_array()
            .map(|a| a.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect::<Vec<_>>())
            .unwrap_or_default()
    };
    let swim_f = freqs(swim);
    let crawl_f = freqs(crawl);
    let swim_ok = !swim_f.is_empty() && swim_f.iter().all(|f| within(*f, SWIM_TARGET_HZ, SWIM_REL));
    let (lo, hi) = (CRAWL_BAND_HZ.0 * (1.0 - CRAWL_BAND_REL), CRAWL_BAND_HZ.1 * (1.0 + CRAWL_BAND_REL));
    let crawl_ok = !crawl_f.is_empty() && crawl_f.iter().all(|f| *f >= lo && *f <= hi);
    // The crawler band is reported, not enforced.
    println!(
        "criterion 12 crawler band (reported): {} (f1 {crawl_f:.3?} Hz, band {lo:.3}-{hi:.3} Hz)",
        if crawl_ok { "PASS" } else { "FLAGGED" }
    );
    report(
        12,
        "calibrated swimmer frequency",
        swim_ok,
        format!("swimmer f1 {swim_f:.3?} Hz, target {SWIM_TARGET_HZ} Hz +-{:.0}%", SWIM_REL * 100.0),
    );
}

fn main() -> ExitCode {
    let checks: [(&str, fn()); 13] = [
        ("criterion_01_response_trichotomy", criterion_01_response_trichotomy),
        ("criterion_02_bistability_and_symmetry", criterion_02_bistability_and_symmetry),
        ("criterion_03_barrier_monotonicity", criterion_03_barrier_monotonicity),
        ("criterion_04_switching_monotonicity", criterion_04_switching_monotonicity),
        ("criterion_05_multistability_with_forbidden_states", criterion_05_multistability_with_forbidden_states),
        ("criterion_06_self_oscillation_structure", criterion_06_self_oscillation_structure),
        ("criterion_07_locomotion_monotonicity", criterion_07_locomotion_monotonicity),
        ("criterion_08_self_shadowing_reduced_modes", criterion_08_self_shadowing_reduced_modes),
        ("criterion_09_numerical_hygiene", criterion_09_numerical_hygiene),
        ("criterion_10_oscillation_frequency", criterion_10_oscillation_frequency),
        ("criterion_11_kinetic_time_constant", criterion_11_kinetic_time_constant),
        ("criterion_12_locomotion_frequencies", criterion_12_locomotion_frequencies),
        ("calibration_self_test", calibration_self_test),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        if std::panic::catch_unwind(check).is_err() {
            failed += 1;
        }
    }
    println!("acceptance: {} of {ran} checks passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
