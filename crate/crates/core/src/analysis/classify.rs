use serde::Serialize;

use crate::dynamics::sweep::check_monotone;
use crate::error::{Error, Result};

pub const LINEAR_R2: f64 = 0.99;
pub const SATURATING_RATIO: f64 = 0.2;
pub const SUPERLINEAR_RATIO: f64 = 2.0;
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseClass {
    Linear,
    Saturating,
    Superlinear,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub class: ResponseClass,
    pub r_squared: f64,
    pub initial_slope: f64,
    pub end_slope: f64,
    pub slope_ratio: f64,
    pub linear_r2_threshold: f64,
    pub saturating_ratio_threshold: f64,
    pub superlinear_ratio_threshold: f64,
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Linear, saturating or superlinear by best-line R² and the ratio of the
/// end to the initial 3-point secant slope.
pub fn classify_response(x: &[f64], y: &[f64]) -> Result<Classification> {
    if x.len() != y.len() || x.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_POINTS} curve points, got {}",
            x.len().min(y.len())
        )));
    }
    check_monotone(x)?;
    let n = x.len();
    let initial_slope = (y[2] - y[0]) / (x[2] - x[0]);
    let end_slope = (y[n - 1] - y[n - 3]) / (x[n - 1] - x[n - 3]);
    let slope_ratio = if initial_slope == 0.0 {
        if end_slope == 0.0 {
            1.0
        } else {
            f64::INFINITY * end_slope.signum()
        }
    } else {
        end_slope / initial_slope
    };
    let r2 = r_squared(x, y);
    let class = if r2 > LINEAR_R2 {
        ResponseClass::Linear
    } else if slope_ratio < SATURATING_RATIO {
        ResponseClass::Saturating
    } else if slope_ratio > SUPERLINEAR_RATIO {
        ResponseClass::Superlinear
    } else {
        ResponseClass::Mixed
    };
    Ok(Classification {
        class,
        r_squared: r2,
        initial_slope,
        end_slope,
        slope_ratio,
        linear_r2_threshold: LINEAR_R2,
        saturating_ratio_threshold: SATURATING_RATIO,
        superlinear_ratio_threshold: SUPERLINEAR_RATIO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, hi: f64) -> Vec<f64> {
        (0..n).map(|k| hi * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn affine_is_linear() {
        let x = grid(12, 3.0);
        let y: Vec<f64> = x.iter().map(|v| 0.4 * v - 1.0).collect();
        assert_eq!(classify_response(&x, &y).unwrap().class, ResponseClass::Linear);
    }

    #[test]
    fn exponential_saturation() {
        let x = grid(12, 5.0);
        let y: Vec<f64> = x.iter().map(|v| 1.0 - (-v).exp()).collect();
        let c = classify_response(&x, &y).unwrap();
        assert_eq!(c.class, ResponseClass::Saturating);
        assert!(c.slope_ratio < 0.05);
    }

    #[test]
    fn exponential_growth() {
        let x = grid(12, 3.0);
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert_eq!(classify_response(&x, &y).unwrap().class, ResponseClass::Superlinear);
    }

    #[test]
    fn too_few_points() {
        let x = grid(7, 1.0);
        assert!(matches!(classify_response(&x, &x), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn non_monotone_grid() {
        let mut x = grid(10, 1.0);
        x.swap(3, 4);
        assert!(matches!(classify_response(&x, &x), Err(Error::NonMonotoneGrid)));
    }
}
