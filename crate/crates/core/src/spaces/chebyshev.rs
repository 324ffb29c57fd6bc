//! Random Chebyshev series `u(x) = sum_{i<N} a_i T_i(x~)`, `a_i ~ U[-M, M]`,
//! where `x~` maps the grid's domain affinely onto `[-1, 1]`.

use std::sync::Arc;

use rand::Rng;

use super::{InputFunction, SensorGrid, SpaceTag};
use crate::error::{invalid, Result};
use crate::rng::{stream, Purpose};

/// Clenshaw evaluation of `sum_i c_i T_i(t)` for `t` in `[-1, 1]`.
pub fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    match coeffs.first() {
        Some(&c0) => t * b1 - b2 + c0,
        None => 0.0,
    }
}

fn to_reference(x: f64, a: f64, b: f64) -> f64 {
    (2.0 * (x - a) / (b - a) - 1.0).clamp(-1.0, 1.0)
}

/// Tabulates a Chebyshev series with the given coefficients on `grid`.
pub fn chebyshev_from_coeffs(coeffs: &[f64], grid: Arc<SensorGrid>, bound: f64, seed: u64) -> Result<InputFunction> {
    let (a, b) = grid.domain();
    let values = grid
        .points()
        .iter()
        .map(|&x| clenshaw(coeffs, to_reference(x, a, b)))
        .collect();
    InputFunction::new(
        grid,
        values,
        SpaceTag::Chebyshev {
            degree: coeffs.len(),
            bound,
        },
        seed,
    )
}

#[derive(Debug, Clone)]
pub struct ChebyshevSampler {
    degree: usize,
    bound: f64,
    grid: Arc<SensorGrid>,
}

impl ChebyshevSampler {
    pub fn new(degree: usize, bound: f64, grid: Arc<SensorGrid>) -> Result<Self> {
        if degree < 1 {
            return Err(invalid("Chebyshev degree count N must be at least 1"));
        }
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(invalid(format!("Chebyshev coefficient bound M must be positive, got {bound}")));
        }
        Ok(Self { degree, bound, grid })
    }

    pub fn coefficients(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = stream(seed, Purpose::InputFunction, index);
        (0..self.degree)
            .map(|_| rng.random_range(-self.bound..=self.bound))
            .collect()
    }

    pub fn sample(&self, seed: u64, index: u64) -> InputFunction {
        let c = self.coefficients(seed, index);
        chebyshev_from_coeffs(&c, Arc::clone(&self.grid), self.bound, index).expect("finite series")
    }
}

pub fn chebyshev_sample(degree: usize, bound: f64, grid: Arc<SensorGrid>, seed: u64) -> Result<InputFunction> {
    let mut u = ChebyshevSampler::new(degree, bound, grid)?.sample(seed, 0);
    u.seed = seed;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64) -> Arc<SensorGrid> {
        Arc::new(SensorGrid::uniform(a, b, 201).unwrap())
    }

    #[test]
    fn clenshaw_matches_cosine_definition() {
        let coeffs = [0.3, -1.2, 0.5, 2.0, -0.7, 0.11];
        for i in 0..=50 {
            let t = -1.0 + 2.0 * i as f64 / 50.0;
            let theta = t.acos();
            let direct: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * (k as f64 * theta).cos())
                .sum();
            assert!((clenshaw(&coeffs, t) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_coefficients() {
        let u = chebyshev_from_coeffs(&[1.0, 0.0, 0.0, 0.0], grid(0.0, 1.0), 1.0, 0).unwrap();
        assert!(u.values().iter().all(|&v| v == 1.0));
        let g = grid(-1.0, 1.0);
        let u = chebyshev_from_coeffs(&[0.0, 1.0, 0.0], g.clone(), 1.0, 0).unwrap();
        for (x, v) in g.points().iter().zip(u.values()) {
            assert!((x - v).abs() < 1e-15);
        }
    }

    #[test]
    fn samples_bounded_by_n_times_m() {
        let s = ChebyshevSampler::new(7, 2.5, grid(0.0, 3.0)).unwrap();
        for i in 0..50 {
            let u = s.sample(1, i);
            assert!(u.values().iter().all(|v| v.abs() <= 7.0 * 2.5));
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ChebyshevSampler::new(0, 1.0, grid(0.0, 1.0)).is_err());
        assert!(ChebyshevSampler::new(3, 0.0, grid(0.0, 1.0)).is_err());
        assert!(chebyshev_sample(3, -1.0, grid(0.0, 1.0), 0).is_err());
    }

    #[test]
    fn deterministic() {
        let a = chebyshev_sample(5, 1.0, grid(0.0, 1.0), 4).unwrap();
        let b = chebyshev_sample(5, 1.0, grid(0.0, 1.0), 4).unwrap();
        assert_eq!(a, b);
    }
}
