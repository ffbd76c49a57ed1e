use serde::{Deserialize, Serialize};

use crate::dynamics::integrate::{simulate, Trace};
use crate::dynamics::steady::{tilt, SEED_TILT};
use crate::error::Result;
use crate::model::{IntegratorSettings, LightField, ScenarioConfig, SystemState};
use crate::system::System;

/// Identical or different units placed side by side along +x, `spacing`
/// apart, under shared lights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub units: Vec<ScenarioConfig>,
    #[serde(default)]
    pub shared_lights: Vec<LightField>,
    /// Distance between neighbouring bases, m.
    pub spacing: f64,
}

impl ChainConfig {
    /// `count` copies of `unit`.
    pub fn uniform(unit: ScenarioConfig, count: usize, shared_lights: Vec<LightField>, spacing: f64) -> Self {
        Self {
            units: vec![unit; count],
            shared_lights,
            spacing,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn system(&self) -> Result<System> {
        let units = self
            .units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), [i as f64 * self.spacing, 0.0]))
            .collect();
        System::chain(units, self.shared_lights.clone())
    }

    /// Sets every fuel light (unit-owned and shared) to `mw_cm2`.
    pub fn set_fuel_intensity(&mut self, mw_cm2: f64) {
        for u in &mut self.units {
            u.set_fuel_intensity(mw_cm2);
        }
        for l in self
            .shared_lights
            .iter_mut()
            .filter(|l| l.role == crate::model::LightRole::Fuel)
        {
            l.intensity_mw_cm2 = mw_cm2;
        }
    }
}

/// Rest state with unit `i` tilted toward `signs[i]` (−1 leans the centre
/// toward −x, +1 toward +x) by `SEED_TILT`.
pub fn signed_seed(system: &System, signs: &[i8]) -> SystemState {
    let mut s = system.rest.clone();
    for (u, &sign) in signs.iter().enumerate() {
        s = tilt(system, &s, u, -(sign as f64) * SEED_TILT);
    }
    s
}

/// Integrates a chain from the tilted seed given by `signs` (one of −1, 0, +1 per unit).
pub fn run_chain(chain: &ChainConfig, signs: &[i8], settings: &IntegratorSettings) -> Result<Trace> {
    let system = chain.system()?;
    let initial = signed_seed(&system, signs);
    simulate(&system, &initial, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate::baffle_lean;
    use crate::scenarios::calibration::ShippedCalibration;
    use crate::scenarios::registry::arch_chain;

    #[test]
    fn seeds_lean_the_requested_way() {
        let chain = arch_chain(&ShippedCalibration::identity(), 2);
        let system = chain.system().unwrap();
        let s = signed_seed(&system, &[1, -1]);
        assert!(baffle_lean(&system, 0, &s) > 0.0);
        assert!(baffle_lean(&system, 1, &s) < 0.0);
        assert_eq!(signed_seed(&system, &[0, 0]).theta, system.rest.theta);
    }

    #[test]
    fn fuel_setter_reaches_every_light() {
        let mut chain = arch_chain(&ShippedCalibration::identity(), 2);
        chain.set_fuel_intensity(33.0);
        let system = chain.system().unwrap();
        assert!(system
            .lights
            .iter()
            .filter(|l| l.role == crate::model::LightRole::Fuel)
            .all(|l| l.intensity_mw_cm2 == 33.0));
    }

    #[test]
    fn json_round_trip() {
        let chain = arch_chain(&ShippedCalibration::identity(), 3);
        let text = serde_json::to_string(&chain).unwrap();
        assert_eq!(ChainConfig::from_json(&text).unwrap(), chain);
    }
}
