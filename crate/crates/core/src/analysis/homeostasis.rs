use serde::Serialize;

use crate::analysis::oscillation::periodic_mean;
use crate::analysis::spectrum::{spectrum, Window};
use crate::error::{Error, Result};

pub const MIN_PERIODS: f64 = 5.0;

#[derive(Debug, Clone, Serialize)]
pub struct PhaseStats {
    pub name: String,
    /// Analysed window (second half of the phase), s.
    pub start: f64,
    pub end: f64,
    pub dc: f64,
    pub f1: Option<f64>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomeostasisReport {
    pub phases: Vec<PhaseStats>,
    /// Largest pairwise DC difference relative to the DC before the disturbance.
    pub drift: f64,
    /// Largest relative change of f1 against the phase before the disturbance.
    pub f1_change: f64,
}

/// DC, first harmonic and amplitude before, during and after a disturbance
/// active on `[on, off)`. Each phase is analysed over its second half,
/// trimmed to whole periods.
pub fn homeostasis_report(time: &[f64], signal: &[f64], on: f64, off: f64) -> Result<HomeostasisReport> {
    let end = *time.last().ok_or_else(|| Error::InsufficientData("empty trace".into()))?;
    let bounds = [("before", 0.0, on), ("during", on, off), ("after", off, end)];
    let mut phases = Vec::new();
    for (name, a, b) in bounds {
        let start = 0.5 * (a + b);
        let lo = time.partition_point(|t| *t < start);
        let hi = time.partition_point(|t| *t < b).max(lo);
        let (t, x) = (&time[lo..hi], &signal[lo..hi]);
        if t.len() < 2 {
            return Err(Error::PhaseTooShort(format!("{name} phase has no samples")));
        }
        let s = spectrum(t, x, Window::Hann).map_err(|e| Error::PhaseTooShort(format!("{name}: {e}")))?;
        if let Some(f) = s.f1 {
            if (b - a) * f < MIN_PERIODS {
                return Err(Error::PhaseTooShort(format!(
                    "{name} phase spans {:.2} periods, need {MIN_PERIODS}",
                    (b - a) * f
                )));
            }
        }
        let (lo_v, hi_v) = x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(p, q), v| (p.min(*v), q.max(*v)));
        phases.push(PhaseStats {
            name: name.into(),
            start,
            end: b,
            dc: periodic_mean(t, x, s.f1),
            f1: s.f1,
            amplitude: 0.5 * (hi_v - lo_v),
        });
    }
    let reference = phases[0].dc.abs();
    let mut drift: f64 = 0.0;
    for i in 0..phases.len() {
        for j in i + 1..phases.len() {
            drift = drift.max((phases[i].dc - phases[j].dc).abs());
        }
    }
    let drift = if reference > 0.0 { drift / reference } else { drift };
    let f1_change = match phases[0].f1 {
        Some(f0) => phases[1..]
            .iter()
            .filter_map(|p| p.f1)
            .map(|f| (f / f0 - 1.0).abs())
            .fold(0.0, f64::max),
        None => 0.0,
    };
    Ok(HomeostasisReport {
        phases,
        drift,
        f1_change,
    })
}
