use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::chain::{signed_seed, ChainConfig};
use crate::dynamics::integrate::{baffle_lean, simulate, velocity_norm};
use crate::error::Result;
use crate::model::SystemState;
use crate::system::System;

/// Settling: velocity norm below this after whole `5·τ_th` windows, rad/s.
pub const SETTLE_VELOCITY: f64 = 1e-8;
/// Number of `5·τ_th` windows tried before a seed is declared unresolved.
pub const SETTLE_WINDOWS: usize = 8;
/// Baffle displacement below which a unit counts as undecided, as a fraction of its length.
pub const SIDE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed: String,
    /// Final configuration, `None` when unresolved.
    pub configuration: Option<String>,
    pub settled: bool,
    #[serde(skip)]
    pub state: SystemState,
}

#[derive(Debug, Clone, Serialize)]
pub struct StableConfigurationSet {
    pub unit_count: usize,
    pub observed: Vec<String>,
    pub forbidden: Vec<String>,
    /// Seeds that did not settle or ended undecided.
    pub unresolved: Vec<String>,
    pub outcomes: Vec<SeedOutcome>,
}

impl StableConfigurationSet {
    pub fn representative(&self, configuration: &str) -> Option<&SystemState> {
        self.outcomes
            .iter()
            .find(|o| o.configuration.as_deref() == Some(configuration))
            .map(|o| &o.state)
    }
}

/// `L`/`R` label of a sign vector (−1 → L).
pub fn label(signs: &[i8]) -> String {
    signs.iter().map(|s| if *s < 0 { 'L' } else { 'R' }).collect()
}

/// All `2^n` sign vectors in lexicographic L < R order.
pub fn all_sign_vectors(n: usize) -> Vec<Vec<i8>> {
    (0..1usize << n)
        .map(|bits| (0..n).map(|i| if bits >> (n - 1 - i) & 1 == 1 { 1 } else { -1 }).collect())
        .collect()
}

fn classify(system: &System, state: &SystemState) -> Option<String> {
    let mut out = String::new();
    for (u, unit) in system.units.iter().enumerate() {
        let dx = baffle_lean(system, u, state);
        if dx.abs() < SIDE_THRESHOLD * unit.config.geometry.length {
            return None;
        }
        out.push(if dx < 0.0 { 'L' } else { 'R' });
    }
    Some(out)
}

fn settle(system: &System, signs: &[i8]) -> Result<SeedOutcome> {
    let mut state = signed_seed(system, signs);
    let mut settings = system.config().integrator.clone();
    let window = 5.0 * system.thermal_time();
    settings.sample_stride = ((window / settings.dt) / 10.0).ceil().max(1.0) as usize;
    let mut settled = false;
    for _ in 0..SETTLE_WINDOWS {
        settings.t_end = state.time + settings.sample_interval() * (window / settings.sample_interval()).ceil();
        state = simulate(system, &state, &settings)?.final_state().clone();
        if velocity_norm(system, &state) < SETTLE_VELOCITY {
            settled = true;
            break;
        }
    }
    let configuration = if settled { classify(system, &state) } else { None };
    Ok(SeedOutcome {
        seed: label(signs),
        configuration,
        settled,
        state,
    })
}

/// Integrates a chain from every `±SEED_TILT` sign-vector seed at fuel
/// `intensity` (mW/cm²) and collects the distinct settled configurations.
pub fn enumerate_states(chain: &ChainConfig, intensity: f64) -> Result<StableConfigurationSet> {
    let mut chain = chain.clone();
    chain.set_fuel_intensity(intensity);
    let system = chain.system()?;
    let n = system.units.len();
    let seeds = all_sign_vectors(n);
    let outcomes: Vec<SeedOutcome> = seeds
        .par_iter()
        .map(|s| settle(&system, s))
        .collect::<Result<_>>()?;
    let mut observed: Vec<String> = outcomes.iter().filter_map(|o| o.configuration.clone()).collect();
    observed.sort();
    observed.dedup();
    let forbidden = seeds
        .iter()
        .map(|s| label(s))
        .filter(|l| !observed.contains(l))
        .collect();
    let unresolved = outcomes
        .iter()
        .filter(|o| o.configuration.is_none())
        .map(|o| o.seed.clone())
        .collect();
    Ok(StableConfigurationSet {
        unit_count: n,
        observed,
        forbidden,
        unresolved,
        outcomes,
    })
}
