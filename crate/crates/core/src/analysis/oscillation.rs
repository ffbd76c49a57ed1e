use serde::Serialize;

use crate::analysis::spectrum::{spectrum, Window};
use crate::error::Result;

/// Below this half peak-to-peak amplitude the signal is treated as steady, m.
pub const MIN_AMPLITUDE: f64 = 1e-6;
/// Relative agreement of the third- and fourth-quarter estimates for convergence.
pub const CONVERGENCE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Serialize)]
pub struct OscillationMetrics {
    /// First harmonic, Hz; `None` without oscillation.
    pub f1: Option<f64>,
    /// Half peak-to-peak over the analysed window, m.
    pub amplitude: f64,
    pub dc: f64,
    pub converged: bool,
    pub f1_q3: Option<f64>,
    pub f1_q4: Option<f64>,
    pub amplitude_q3: f64,
    pub amplitude_q4: f64,
}

fn half_range(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    0.5 * (hi - lo)
}

/// Mean over the largest whole number of periods at the end of `x`.
pub fn periodic_mean(time: &[f64], x: &[f64], f1: Option<f64>) -> f64 {
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let Some(f) = f1 else { return mean(x) };
    if time.len() < 2 {
        return mean(x);
    }
    let dt = time[1] - time[0];
    let per = 1.0 / (f * dt);
    let whole = ((x.len() as f64 - 1.0) / per).floor();
    if whole < 1.0 {
        return mean(x);
    }
    let take = ((whole * per).round() as usize).clamp(1, x.len());
    mean(&x[x.len() - take..])
}

fn window_estimate(time: &[f64], x: &[f64]) -> Result<(Option<f64>, f64)> {
    let amp = half_range(x);
    if amp < MIN_AMPLITUDE {
        return Ok((None, 0.0));
    }
    Ok((spectrum(time, x, Window::Hann)?.f1, amp))
}

fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONVERGENCE_TOLERANCE * a.abs().max(b.abs())
}

/// Frequency, amplitude and DC of the second half of a trace, plus a
/// convergence check comparing the third and fourth quarters.
pub fn oscillation_metrics(time: &[f64], signal: &[f64]) -> Result<OscillationMetrics> {
    let n = signal.len();
    let half = n / 2;
    let (t2, x2) = (&time[half..], &signal[half..]);
    let q = n / 4;
    let (t3, x3) = (&time[half..half + q], &signal[half..half + q]);
    let (t4, x4) = (&time[n - q..], &signal[n - q..]);
    let (f1, amplitude) = window_estimate(t2, x2)?;
    let (f1_q3, amplitude_q3) = window_estimate(t3, x3)?;
    let (f1_q4, amplitude_q4) = window_estimate(t4, x4)?;
    let converged = match (f1_q3, f1_q4) {
        (Some(a), Some(b)) => agree(a, b) && agree(amplitude_q3, amplitude_q4),
        (None, None) => true,
        _ => false,
    };
    Ok(OscillationMetrics {
        f1,
        amplitude,
        dc: periodic_mean(t2, x2, f1),
        converged,
        f1_q3,
        f1_q4,
        amplitude_q3,
        amplitude_q4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn steady_signal_has_no_oscillation() {
        let t: Vec<f64> = (0..4000).map(|i| i as f64 * 0.005).collect();
        let x: Vec<f64> = t.iter().map(|t| 0.004 * (1.0 - (-t).exp())).collect();
        let m = oscillation_metrics(&t, &x).unwrap();
        assert_eq!(m.amplitude, 0.0);
        assert!(m.f1.is_none());
        assert!(m.converged);
    }

    #[test]
    fn limit_cycle_metrics() {
        let t: Vec<f64> = (0..6000).map(|i| i as f64 * 0.005).collect();
        let x: Vec<f64> = t
            .iter()
            .map(|t| 0.004 + 0.001 * (1.0 - (-t).exp()) * (2.0 * PI * 3.8 * t).sin())
            .collect();
        let m = oscillation_metrics(&t, &x).unwrap();
        assert!((m.f1.unwrap() - 3.8).abs() < 0.02);
        assert!((m.amplitude - 0.001).abs() < 2e-5);
        assert!((m.dc - 0.004).abs() < 1e-5);
        assert!(m.converged);
    }
}
