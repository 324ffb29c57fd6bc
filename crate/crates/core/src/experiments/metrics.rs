use serde::{Deserialize, Serialize};

use super::fit::{linear_fit, RateFit};
use super::report::ExperimentReport;
use crate::deeponet::{Batch, OperatorModel};
use crate::error::{invalid, shape, Result};

/// MSE after discarding the `ceil(trim_fraction * n)` largest squared errors.
pub fn trimmed_mse(preds: &[f64], targets: &[f64], trim_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&trim_fraction) {
        return Err(invalid(format!("trim fraction must lie in [0, 1), got {trim_fraction}")));
    }
    if preds.len() != targets.len() {
        return Err(shape(format!("{} predictions for {} targets", preds.len(), targets.len())));
    }
    if preds.is_empty() {
        return Err(invalid("MSE of an empty set"));
    }
    let mut sq: Vec<f64> = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).collect();
    let drop = (trim_fraction * sq.len() as f64).ceil() as usize;
    let keep = sq.len() - drop.min(sq.len() - 1);
    if drop > 0 {
        sq.select_nth_unstable_by(keep - 1, |a, b| a.total_cmp(b));
        sq.truncate(keep);
    }
    Ok(sq.iter().sum::<f64>() / keep as f64)
}

pub fn trimmed_test_mse<M: OperatorModel>(model: &M, test: &Batch, trim_fraction: f64) -> Result<f64> {
    trimmed_mse(&model.predict(test)?, test.targets, trim_fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    /// Final test MSE minus final train MSE, per run.
    pub gaps: Vec<f64>,
    /// Least-squares slope of test MSE on train MSE across runs (≥ 3 runs).
    pub slope: Option<RateFit>,
}

/// Generalization gaps and the across-run correlation of test on train error.
pub fn generalization_gap(reports: &[&ExperimentReport]) -> Result<GapSummary> {
    if reports.is_empty() {
        return Err(invalid("need at least one report"));
    }
    let train: Vec<f64> = reports.iter().map(|r| r.final_train_mse).collect();
    let test: Vec<f64> = reports.iter().map(|r| r.final_test_mse).collect();
    let gaps = train.iter().zip(&test).map(|(a, b)| b - a).collect();
    let slope = if reports.len() >= 3 { linear_fit(&train, &test).ok() } else { None };
    Ok(GapSummary { gaps, slope })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_trim_is_plain_mse() {
        let p = [1.0, 2.0, 3.0];
        let t = [1.5, 2.0, 2.0];
        assert_eq!(trimmed_mse(&p, &t, 0.0).unwrap(), crate::nn::mse(&p, &t).unwrap());
    }

    #[test]
    fn worst_record_dropped() {
        let mut p = vec![0.0; 1000];
        let t = vec![0.1; 1000];
        p[17] = 1e6;
        assert!((trimmed_mse(&p, &t, 0.001).unwrap() - 0.01).abs() < 1e-15);
        let eq = vec![0.2; 1000];
        assert!((trimmed_mse(&eq, &t, 0.001).unwrap() - 0.01).abs() < 1e-15);
        assert!(trimmed_mse(&p, &t, 1.0).is_err());
        assert!(trimmed_mse(&p, &t, -0.1).is_err());
    }

    #[test]
    fn stats() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn trimming_never_increases_mse(errs in proptest::collection::vec(-10.0f64..10.0, 1..200), frac in 0.0f64..0.5) {
            let zeros = vec![0.0; errs.len()];
            let full = trimmed_mse(&errs, &zeros, 0.0).unwrap();
            let trimmed = trimmed_mse(&errs, &zeros, frac).unwrap();
            prop_assert!(trimmed <= full * (1.0 + 1e-12));
            prop_assert!(trimmed >= 0.0);
        }
    }
}
