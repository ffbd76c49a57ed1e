use crate::error::{Error, Result};

/// Settling time constant of a step-like response: a log-linear fit of the
/// remaining distance to the final value over the window where that
/// distance falls from 50% to 5% of its initial size.
pub fn settling_time_constant(time: &[f64], signal: &[f64]) -> Result<f64> {
    let n = signal.len();
    if n < 8 {
        return Err(Error::InsufficientData("need at least 8 samples".into()));
    }
    let last = signal[n - 1];
    let r0 = (last - signal[0]).abs();
    if r0 == 0.0 {
        return Err(Error::InsufficientData("signal does not move".into()));
    }
    let start = signal
        .iter()
        .position(|v| (last - v).abs() <= 0.5 * r0)
        .unwrap_or(n - 1);
    let pts: Vec<(f64, f64)> = (start..n)
        .map(|i| (time[i], (last - signal[i]).abs()))
        .take_while(|(_, r)| *r >= 0.05 * r0)
        .map(|(t, r)| (t, r.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData("too few samples in the settling window".into()));
    }
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::InsufficientData("response does not settle".into()));
    }
    Ok(-1.0 / slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_time_constant() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.05).collect();
        let x: Vec<f64> = t.iter().map(|t| 3.0 * (1.0 - (-t / 10.0).exp())).collect();
        let tau = settling_time_constant(&t, &x).unwrap();
        assert!((tau / 10.0 - 1.0).abs() < 1e-3, "tau {tau}");
    }
}
