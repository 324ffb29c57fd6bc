use crate::error::{invalid, shape, Result};

/// Mean of squared differences.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(invalid("mse of an empty vector"));
    }
    if pred.len() != target.len() {
        return Err(shape(format!(
            "mse: {} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(mse(&[2.0], &[-1.0]).unwrap(), 9.0);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn nonnegative_and_permutation_invariant(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40),
            rot in 0usize..40,
        ) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let e = mse(&p, &t).unwrap();
            prop_assert!(e >= 0.0);
            prop_assert_eq!(e == 0.0, p == t);
            let mut pr = p.clone();
            let mut tr = t.clone();
            let k = rot % p.len();
            pr.rotate_left(k);
            tr.rotate_left(k);
            let e2 = mse(&pr, &tr).unwrap();
            prop_assert!((e - e2).abs() <= 1e-12 * e.max(1.0));
        }
    }
}
