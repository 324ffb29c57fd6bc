use super::ParamSet;
use crate::error::{invalid, Result};

/// Compares analytic gradients with central differences of the loss.
///
/// Returns `max |analytic - numeric| / max(1, |analytic|)` over every
/// trainable scalar. `loss_and_grad` must return the loss and its analytic
/// gradient at the given parameters.
pub fn gradient_check<P, F>(params: &P, eps: f64, loss_and_grad: F) -> Result<f64>
where
    P: ParamSet + Clone,
    F: Fn(&P) -> (f64, P),
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("finite-difference step must be positive, got {eps}")));
    }
    let (_, analytic) = loss_and_grad(params);
    let analytic: Vec<Vec<f64>> = analytic.param_blocks().iter().map(|b| b.to_vec()).collect();

    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for (bi, block) in analytic.iter().enumerate() {
        for (i, &a) in block.iter().enumerate() {
            let orig = probe.param_blocks()[bi][i];
            probe.param_blocks_mut()[bi][i] = orig + eps;
            let (plus, _) = loss_and_grad(&probe);
            probe.param_blocks_mut()[bi][i] = orig - eps;
            let (minus, _) = loss_and_grad(&probe);
            probe.param_blocks_mut()[bi][i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct W(Vec<f64>);

    impl ParamSet for W {
        fn param_blocks(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn quadratic_loss_is_exact() {
        // loss = (w x - y)^2 over a few points
        let xs = [0.5, -1.0, 2.0];
        let ys = [1.0, 0.3, -0.7];
        let f = |w: &W| {
            let mut loss = 0.0;
            let mut g = 0.0;
            for (x, y) in xs.iter().zip(&ys) {
                let r = w.0[0] * x - y;
                loss += r * r;
                g += 2.0 * r * x;
            }
            (loss, W(vec![g]))
        };
        let err = gradient_check(&W(vec![0.37]), 1e-4, f).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let f = |w: &W| (w.0[0] * w.0[0], W(vec![3.0 * w.0[0]]));
        let err = gradient_check(&W(vec![1.0]), 1e-5, f).unwrap();
        assert!(err > 0.3);
    }

    #[test]
    fn zero_step_rejected() {
        let f = |w: &W| (w.0[0], W(vec![1.0]));
        assert!(gradient_check(&W(vec![1.0]), 0.0, f).is_err());
        assert!(gradient_check(&W(vec![1.0]), -1e-3, f).is_err());
    }
}
