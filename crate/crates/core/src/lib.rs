//! Deterministic 2D simulator for feedback-regulated photothermal soft
//! actuators.
//!
//! A strip is discretized into rigid segments joined by rotational springs
//! whose rest angle follows the local temperature. Light reaches the strip
//! through a 2D shadow caster, so any baffle or the strip itself can occlude
//! the beam and turn deformation into a change of absorbed power.
//!
//! ```no_run
//! use photofeedback::scenarios;
//! let summary = scenarios::run_scenario("fig1e_negative", &[], None).unwrap();
//! println!("{}", serde_json::to_string_pretty(&summary).unwrap());
//! ```

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod optics;
pub mod scenarios;
pub mod system;
pub mod thermomech;

pub use error::{Error, FieldError, Result};
pub use model::{ScenarioConfig, SystemState};
pub use system::System;
