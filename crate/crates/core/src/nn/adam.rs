use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{invalid, shape, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Moment accumulators laid out like the parameter blocks they track.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P, config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) || !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(invalid(format!("bad Adam hyperparameters {config:?}")));
        }
        let zeros: Vec<Vec<f64>> = params
            .param_blocks()
            .iter()
            .map(|b| vec![0.0; b.len()])
            .collect();
        Ok(Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Gradients are validated before any
    /// state is touched, so a rejected step leaves params and moments intact.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gblocks = grads.param_blocks();
        if gblocks.len() != self.first.len()
            || gblocks.iter().zip(&self.first).any(|(g, m)| g.len() != m.len())
        {
            return Err(shape("gradient blocks do not match the optimizer state"));
        }
        for (block, g) in gblocks.iter().enumerate() {
            if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { block, index, value });
            }
        }
        let mut pblocks = params.param_blocks_mut();
        if pblocks.len() != gblocks.len() {
            return Err(shape("parameter blocks do not match the gradient blocks"));
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in pblocks
            .iter_mut()
            .zip(&gblocks)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn adam_step<P: ParamSet>(state: &mut AdamState, params: &mut P, grads: &P) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, PartialEq)]
    struct Scalar(Vec<f64>);

    impl ParamSet for Scalar {
        fn param_blocks(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = Scalar(vec![0.3, -1.0, 2.0]);
        let start = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default()).unwrap();
        let zero = Scalar(vec![0.0; 3]);
        for _ in 0..500 {
            st.step(&mut p, &zero).unwrap();
        }
        assert_eq!(p, start);
        assert_eq!(st.step_count(), 500);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        for g in [3.0, -0.02, 1e4] {
            let mut p = Scalar(vec![1.0]);
            let mut st = AdamState::new(&p, AdamConfig::default()).unwrap();
            st.step(&mut p, &Scalar(vec![g])).unwrap();
            let delta = p.0[0] - 1.0;
            assert_eq!(delta.signum(), -g.signum());
            // -lr * g / (|g| + eps)
            let expected = 1e-3 * g.abs() / (g.abs() + 1e-8);
            assert!((delta.abs() - expected).abs() < 1e-15, "{delta}");
        }
    }

    #[test]
    fn descends_a_quadratic() {
        let mut p = Scalar(vec![1.0]);
        let mut st = AdamState::new(&p, AdamConfig::with_lr(0.1)).unwrap();
        for _ in 0..100 {
            let g = Scalar(vec![2.0 * p.0[0]]);
            st.step(&mut p, &g).unwrap();
        }
        assert!(p.0[0].abs() < 1.0);
        assert!(p.0[0].abs() < 0.2, "w = {}", p.0[0]);
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut p = Scalar(vec![1.0, 2.0]);
        let mut st = AdamState::new(&p, AdamConfig::default()).unwrap();
        let err = st.step(&mut p, &Scalar(vec![0.5, f64::NAN])).unwrap_err();
        match err {
            Error::NonFiniteGradient { block, index, .. } => assert_eq!((block, index), (0, 1)),
            other => panic!("unexpected {other}"),
        }
        assert_eq!(p, Scalar(vec![1.0, 2.0]));
        assert_eq!(st.step_count(), 0);
    }
}
