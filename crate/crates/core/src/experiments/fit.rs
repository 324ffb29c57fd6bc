//! Least-squares rate fits in log-log and semi-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `log(error) = intercept + slope * t(x)`, with `t(x) = log x` (power law)
/// or `t(x) = x` (exponential).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope; zero for two points.
    pub slope_stderr: f64,
    /// Points used, counted from the start of the data.
    pub points: usize,
}

impl RateFit {
    /// `c` in `error = prefactor * x^exponent` (power law) or
    /// `error = prefactor * e^{slope x}` (exponential).
    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }

    /// Power-law exponent.
    pub fn exponent(&self) -> f64 {
        self.slope
    }

    /// `1/k` in `e^{-x/k}`.
    pub fn decay(&self) -> f64 {
        -self.slope
    }

    /// `c` in `error ∝ c^{-x}`.
    pub fn decay_base(&self) -> f64 {
        (-self.slope).exp()
    }

    /// `c` in `error ∝ c^{x}`.
    pub fn growth_base(&self) -> f64 {
        self.slope.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    PowerLaw,
    Exponential,
}

/// Ordinary least squares of `v` on `t`.
pub fn linear_fit(t: &[f64], v: &[f64]) -> Result<RateFit> {
    let n = t.len();
    if n != v.len() {
        return Err(invalid("fit inputs differ in length"));
    }
    if n < 2 {
        return Err(invalid("a fit needs at least two points"));
    }
    let nf = n as f64;
    let tm = t.iter().sum::<f64>() / nf;
    let vm = v.iter().sum::<f64>() / nf;
    let stt: f64 = t.iter().map(|x| (x - tm).powi(2)).sum();
    let stv: f64 = t.iter().zip(v).map(|(x, y)| (x - tm) * (y - vm)).sum();
    let svv: f64 = v.iter().map(|y| (y - vm).powi(2)).sum();
    if stt == 0.0 {
        return Err(invalid("fit abscissae are all equal"));
    }
    let slope = stv / stt;
    let intercept = vm - slope * tm;
    let sse: f64 = t.iter().zip(v).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if svv == 0.0 { 1.0 } else { 1.0 - sse / svv };
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / stt).sqrt() } else { 0.0 };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        slope_stderr,
        points: n,
    })
}

fn log_errors(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 3 {
        return Err(invalid(format!("need at least 3 points, got {}", errors.len())));
    }
    errors
        .iter()
        .map(|&e| {
            if e > 0.0 && e.is_finite() {
                Ok(e.ln())
            } else {
                Err(invalid(format!("errors must be positive and finite, got {e}")))
            }
        })
        .collect()
}

/// Slope of `log error` against `log x`.
pub fn fit_power_law(xs: &[f64], errors: &[f64]) -> Result<RateFit> {
    let v = log_errors(errors)?;
    let t = xs
        .iter()
        .map(|&x| {
            if x > 0.0 {
                Ok(x.ln())
            } else {
                Err(invalid(format!("power-law abscissae must be positive, got {x}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    linear_fit(&t, &v)
}

/// Slope of `log error` against `x`.
pub fn fit_exponential(xs: &[f64], errors: &[f64]) -> Result<RateFit> {
    let v = log_errors(errors)?;
    linear_fit(xs, &v)
}

pub fn fit(kind: FitKind, xs: &[f64], errors: &[f64]) -> Result<RateFit> {
    match kind {
        FitKind::PowerLaw => fit_power_law(xs, errors),
        FitKind::Exponential => fit_exponential(xs, errors),
    }
}

/// Fits every prefix of at least `min_points` points (all points if fewer
/// are available) and keeps the one with the highest R², preferring the
/// longer prefix on ties. Cuts off saturated tails without hand tuning.
pub fn fit_windowed(kind: FitKind, xs: &[f64], errors: &[f64], min_points: usize) -> Result<RateFit> {
    if xs.len() != errors.len() {
        return Err(invalid("fit inputs differ in length"));
    }
    let start = min_points.max(3).min(xs.len());
    let mut best: Option<RateFit> = None;
    for end in start..=xs.len() {
        let f = fit(kind, &xs[..end], &errors[..end])?;
        if best.is_none_or(|b| f.r2 >= b.r2 - 1e-12) {
            best = Some(f);
        }
    }
    best.ok_or_else(|| invalid("need at least 3 points"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn planted_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let errs: Vec<f64> = xs.iter().map(|x: &f64| x.powi(-2)).collect();
        let f = fit_power_law(&xs, &errs).unwrap();
        assert_abs_diff_eq!(f.exponent(), -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.prefactor(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constants_have_zero_rate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let errs = [0.3; 4];
        assert_abs_diff_eq!(fit_power_law(&xs, &errs).unwrap().exponent(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit_exponential(&xs, &errs).unwrap().decay(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn planted_exponential() {
        let xs = [1000.0, 2000.0, 4000.0, 8000.0];
        let errs: Vec<f64> = xs.iter().map(|x: &f64| (-x / 2000.0).exp()).collect();
        let f = fit_exponential(&xs, &errs).unwrap();
        assert_abs_diff_eq!(f.decay(), 1.0 / 2000.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-12);
        let base: Vec<f64> = (2..=10).map(|m| 4.6f64.powi(-m)).collect();
        let ms: Vec<f64> = (2..=10).map(f64::from).collect();
        assert_abs_diff_eq!(fit_exponential(&ms, &base).unwrap().decay_base(), 4.6, epsilon = 1e-10);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0]).is_err());
        assert!(fit_power_law(&[1.0, -2.0, 3.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_exponential(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(fit_exponential(&[1.0, 2.0, 3.0], &[1.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn window_stops_at_plateau() {
        let xs: Vec<f64> = (2..=12).map(f64::from).collect();
        let errs: Vec<f64> = xs.iter().map(|&m| (5.0f64.powf(-m)).max(1e-6)).collect();
        let f = fit_windowed(FitKind::Exponential, &xs, &errs, 4).unwrap();
        assert_eq!(f.points, 7, "2..=8 is the exact exponential part");
        assert_abs_diff_eq!(f.decay_base(), 5.0, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn recovers_planted_rates(slope in -4.0f64..4.0, c in 0.01f64..100.0, n in 3usize..12) {
            let xs: Vec<f64> = (1..=n).map(|i| i as f64 * 1.5).collect();
            let pow: Vec<f64> = xs.iter().map(|x| c * x.powf(slope)).collect();
            let f = fit_power_law(&xs, &pow).unwrap();
            prop_assert!((f.slope - slope).abs() < 1e-9);
            prop_assert!((f.r2 - 1.0).abs() < 1e-9);
            let exp: Vec<f64> = xs.iter().map(|x| c * (slope * x).exp()).collect();
            let g = fit_exponential(&xs, &exp).unwrap();
            prop_assert!((g.slope - slope).abs() < 1e-9);
            prop_assert!((g.prefactor() / c - 1.0).abs() < 1e-9);
        }
    }
}
