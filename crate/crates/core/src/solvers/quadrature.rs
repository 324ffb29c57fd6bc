use crate::error::Result;
use crate::spaces::InputFunction;

/// `int_a^x u` by the composite trapezoid rule on `u`'s own grid. For the
/// piecewise-linear `u` this is exact up to roundoff.
pub fn antiderivative_exact(u: &InputFunction, x: f64) -> Result<f64> {
    u.eval(x)?;
    Ok(AntiderivativeTable::new(u).eval_unchecked(x))
}

/// Prefix trapezoid sums of `u`, for repeated antiderivative queries.
#[derive(Debug, Clone)]
pub struct AntiderivativeTable<'a> {
    u: &'a InputFunction,
    prefix: Vec<f64>,
}

impl<'a> AntiderivativeTable<'a> {
    pub fn new(u: &'a InputFunction) -> Self {
        let xs = u.grid().points();
        let vs = u.values();
        let mut prefix = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        prefix.push(0.0);
        for j in 1..xs.len() {
            acc += 0.5 * (vs[j - 1] + vs[j]) * (xs[j] - xs[j - 1]);
            prefix.push(acc);
        }
        Self { u, prefix }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.u.eval(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        let grid = self.u.grid();
        let x = x.clamp(grid.first(), grid.last());
        let j = grid.segment(x);
        let x0 = grid.points()[j];
        let v0 = self.u.values()[j];
        let vx = self.u.eval_clamped(x);
        self.prefix[j] + 0.5 * (v0 + vx) * (x - x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SensorGrid;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn fine() -> Arc<SensorGrid> {
        Arc::new(SensorGrid::uniform(0.0, 1.0, 1001).unwrap())
    }

    #[test]
    fn constant_one_integrates_to_x() {
        let u = InputFunction::constant(fine(), 1.0).unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((antiderivative_exact(&u, x).unwrap() - x).abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_antiderivative() {
        let u = InputFunction::from_fn(fine(), |t| (2.0 * PI * t).cos()).unwrap();
        let table = AntiderivativeTable::new(&u);
        for i in 0..=97 {
            let x = i as f64 / 97.0;
            let exact = (2.0 * PI * x).sin() / (2.0 * PI);
            assert!((table.eval(x).unwrap() - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn outside_domain_rejected() {
        let u = InputFunction::constant(fine(), 1.0).unwrap();
        assert!(antiderivative_exact(&u, 1.2).is_err());
    }
}
