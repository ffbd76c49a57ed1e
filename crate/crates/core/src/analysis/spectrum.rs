use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 256;
/// Relative deviation of any time step from the mean step that still counts as uniform.
pub const UNIFORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    /// Bin frequencies 0..=fs/2, Hz.
    pub frequency: Vec<f64>,
    /// Single-sided amplitude of the mean-removed signal per bin.
    pub amplitude: Vec<f64>,
    /// Arithmetic mean of the signal.
    pub dc: f64,
    /// Interpolated frequency of the largest non-DC peak; `None` for a constant signal.
    pub f1: Option<f64>,
    /// Interpolated amplitude of that peak.
    pub a1: f64,
    pub sample_rate: f64,
    pub samples: usize,
    pub window: Window,
}

impl SpectrumResult {
    /// `Σ a_k²/2` over interior bins plus `a²` at Nyquist; equals the
    /// signal variance for an unwindowed spectrum.
    pub fn parseval_variance(&self) -> f64 {
        let nyquist = self.samples % 2 == 0;
        let last = self.amplitude.len() - 1;
        self.amplitude
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| if nyquist && k == last { a * a } else { 0.5 * a * a })
            .sum()
    }

    /// Interpolated amplitude of the peak nearest to `f` (within one bin).
    pub fn peak_near(&self, f: f64) -> (f64, f64) {
        let df = self.frequency.get(1).copied().unwrap_or(1.0);
        let k = ((f / df).round() as usize).clamp(1, self.amplitude.len() - 1);
        let lo = k.saturating_sub(1).max(1);
        let hi = (k + 1).min(self.amplitude.len() - 1);
        let best = (lo..=hi)
            .max_by(|a, b| self.amplitude[*a].total_cmp(&self.amplitude[*b]))
            .unwrap_or(k);
        interpolate(&self.amplitude, best, df)
    }
}

fn interpolate(amp: &[f64], k: usize, df: f64) -> (f64, f64) {
    if k == 0 || k + 1 >= amp.len() {
        return (k as f64 * df, amp[k]);
    }
    let (a, b, c) = (amp[k - 1], amp[k], amp[k + 1]);
    let denom = a - 2.0 * b + c;
    let p = if denom.abs() > 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    ((k as f64 + p) * df, b - 0.25 * (a - c) * p)
}

/// Mean sampling step, or `NonUniformSampling`.
pub fn uniform_step(time: &[f64]) -> Result<f64> {
    if time.len() < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let dt = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
    if !(dt > 0.0)
        || time
            .windows(2)
            .any(|w| ((w[1] - w[0]) - dt).abs() > UNIFORM_TOLERANCE * dt)
    {
        return Err(Error::NonUniformSampling);
    }
    Ok(dt)
}

/// DFT of the mean-removed signal with the mean reported as DC.
pub fn spectrum(time: &[f64], signal: &[f64], window: Window) -> Result<SpectrumResult> {
    if time.len() != signal.len() {
        return Err(Error::InsufficientData("time and signal lengths differ".into()));
    }
    if signal.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            signal.len()
        )));
    }
    let dt = uniform_step(time)?;
    let n = signal.len();
    let dc = signal.iter().sum::<f64>() / n as f64;
    let weights: Vec<f64> = match window {
        Window::None => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect(),
    };
    let gain = weights.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .zip(&weights)
        .map(|(v, w)| Complex::new((v - dc) * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let amplitude: Vec<f64> = (0..=half)
        .map(|k| {
            let scale = if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 };
            scale * buf[k].norm() / (n as f64 * gain)
        })
        .collect();
    let df = 1.0 / (n as f64 * dt);
    let frequency = (0..=half).map(|k| k as f64 * df).collect();
    let peak = (1..=half).max_by(|a, b| amplitude[*a].total_cmp(&amplitude[*b]));
    let scale = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (f1, a1) = match peak {
        Some(k) if amplitude[k] > 1e-9 * scale && amplitude[k] > 0.0 => {
            let (f, a) = interpolate(&amplitude, k, df);
            (Some(f), a)
        }
        _ => (None, 0.0),
    };
    Ok(SpectrumResult {
        frequency,
        amplitude,
        dc,
        f1,
        a1,
        sample_rate: 1.0 / dt,
        samples: n,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 / fs).collect()
    }

    #[test]
    fn pure_tone_frequency() {
        let t = grid(1000, 200.0);
        let x: Vec<f64> = t.iter().map(|t| 0.003 * (2.0 * PI * 3.8 * t).sin()).collect();
        let s = spectrum(&t, &x, Window::None).unwrap();
        assert!((s.f1.unwrap() - 3.8).abs() < 0.05);
        assert!((s.a1 - 0.003).abs() < 0.003 * 0.01);
    }

    #[test]
    fn off_bin_tone_with_hann() {
        let t = grid(1024, 200.0);
        let x: Vec<f64> = t.iter().map(|t| (2.0 * PI * 3.8 * t).cos()).collect();
        let s = spectrum(&t, &x, Window::Hann).unwrap();
        assert!((s.f1.unwrap() - 3.8).abs() < 0.05);
    }

    #[test]
    fn constant_has_no_harmonic() {
        let t = grid(512, 100.0);
        let x = vec![0.004; 512];
        let s = spectrum(&t, &x, Window::None).unwrap();
        assert!((s.dc - 0.004).abs() < 1e-15);
        assert!(s.f1.is_none());
    }

    #[test]
    fn two_tones() {
        let t = grid(1000, 200.0);
        let x: Vec<f64> = t
            .iter()
            .map(|t| 2.0 * (2.0 * PI * 3.8 * t).sin() + 0.5 * (2.0 * PI * 7.6 * t + 0.3).sin())
            .collect();
        let s = spectrum(&t, &x, Window::None).unwrap();
        let (f_a, a) = s.peak_near(3.8);
        let (f_b, b) = s.peak_near(7.6);
        assert!((f_a - 3.8).abs() < 0.05 && (f_b - 7.6).abs() < 0.05);
        assert!(((a / b) / 4.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn parseval_and_mean() {
        for n in [300, 301] {
            let t = grid(n, 50.0);
            let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 113) as f64 * 0.01 + 2.0).collect();
            let s = spectrum(&t, &x, Window::None).unwrap();
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            assert_eq!(s.dc, mean);
            assert!((s.parseval_variance() / var - 1.0).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn jagged_time_rejected() {
        let mut t = grid(400, 100.0);
        t[17] += 0.003;
        let x = vec![0.0; 400];
        assert!(matches!(spectrum(&t, &x, Window::None), Err(Error::NonUniformSampling)));
    }

    #[test]
    fn short_signal_rejected() {
        let t = grid(100, 100.0);
        assert!(matches!(spectrum(&t, &t, Window::None), Err(Error::InsufficientData(_))));
    }
}
