//! Response-curve classification, barriers, switching thresholds, spectra,
//! homeostasis metrics, multistable enumeration and calibration.

pub mod barrier;
pub mod calibrate;
pub mod classify;
pub mod enumerate;
pub mod homeostasis;
pub mod kinetics;
pub mod oscillation;
pub mod spectrum;
pub mod switching;

pub use barrier::{compute_barrier, EnergyBarrier};
pub use calibrate::{calibrate, nelder_mead, CalibrationResult};
pub use classify::{classify_response, Classification, ResponseClass};
pub use enumerate::{enumerate_states, StableConfigurationSet};
pub use homeostasis::{homeostasis_report, HomeostasisReport};
pub use oscillation::{oscillation_metrics, OscillationMetrics};
pub use spectrum::{spectrum, SpectrumResult, Window};
pub use switching::{switching_threshold, ThresholdResult};
