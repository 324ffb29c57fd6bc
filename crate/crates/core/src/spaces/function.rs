use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SensorGrid;
use crate::error::{invalid, Result};

/// Which space an input function was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceTag {
    Grf { length_scale: f64 },
    Chebyshev { degree: usize, bound: f64 },
    /// Built directly from values (tests, manufactured inputs).
    Explicit,
}

/// A sampled input signal `u`, stored on a dense grid and evaluated between
/// nodes by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFunction {
    grid: Arc<SensorGrid>,
    values: Vec<f64>,
    pub space: SpaceTag,
    pub seed: u64,
}

impl InputFunction {
    pub fn new(grid: Arc<SensorGrid>, values: Vec<f64>, space: SpaceTag, seed: u64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(crate::error::shape(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("input function values must be finite"));
        }
        Ok(Self {
            grid,
            values,
            space,
            seed,
        })
    }

    /// Tabulates `f` on `grid`.
    pub fn from_fn(grid: Arc<SensorGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        Self::new(grid, values, SpaceTag::Explicit, 0)
    }

    pub fn constant(grid: Arc<SensorGrid>, c: f64) -> Result<Self> {
        Self::from_fn(grid, |_| c)
    }

    pub fn grid(&self) -> &SensorGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<SensorGrid> {
        Arc::clone(&self.grid)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.grid.first(), self.grid.last())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.grid.interpolate(&self.values, x)
    }

    /// Like [`eval`](Self::eval) but clamps `x` into the domain instead of
    /// failing. Used inside solvers whose stage points may overshoot by ulps.
    #[inline]
    pub(crate) fn eval_clamped(&self, x: f64) -> f64 {
        let x = x.clamp(self.grid.first(), self.grid.last());
        self.grid.interpolate_unchecked(&self.values, x)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "x,u")?;
        for (x, u) in self.grid.points().iter().zip(&self.values) {
            writeln!(w, "{x},{u}")?;
        }
        Ok(())
    }
}

pub fn eval_at(u: &InputFunction, x: f64) -> Result<f64> {
    u.eval(x)
}

/// Values of `u` at each sensor, in sensor order.
pub fn restrict_to_sensors(u: &InputFunction, sensors: &SensorGrid) -> Result<Vec<f64>> {
    sensors.points().iter().map(|&x| u.eval(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fine() -> Arc<SensorGrid> {
        Arc::new(SensorGrid::uniform(0.0, 1.0, 1001).unwrap())
    }

    #[test]
    fn nodes_return_stored_values_exactly() {
        let g = fine();
        let u = InputFunction::from_fn(g.clone(), |x| (7.3 * x).sin() + x * x).unwrap();
        for (x, v) in g.points().iter().zip(u.values()) {
            assert_eq!(eval_at(&u, *x).unwrap(), *v);
        }
    }

    #[test]
    fn midpoint_is_average() {
        let g = fine();
        let u = InputFunction::from_fn(g.clone(), |x| (11.0 * x).cos()).unwrap();
        for j in [0usize, 17, 500, 999] {
            let (x0, x1) = (g.points()[j], g.points()[j + 1]);
            let mid = eval_at(&u, 0.5 * (x0 + x1)).unwrap();
            let avg = 0.5 * (u.values()[j] + u.values()[j + 1]);
            assert!((mid - avg).abs() < 1e-15);
        }
    }

    #[test]
    fn affine_reproduced_everywhere() {
        let u = InputFunction::from_fn(fine(), |x| 2.0 - 3.0 * x).unwrap();
        for i in 0..=137 {
            let x = i as f64 / 137.0;
            assert!((eval_at(&u, x).unwrap() - (2.0 - 3.0 * x)).abs() < 1e-13);
        }
    }

    #[test]
    fn outside_domain_rejected() {
        let u = InputFunction::constant(fine(), 1.0).unwrap();
        assert!(eval_at(&u, -0.01).is_err());
        assert!(eval_at(&u, 1.5).is_err());
        assert!(eval_at(&u, f64::NAN).is_err());
    }

    #[test]
    fn restriction_examples() {
        let g = fine();
        let u = InputFunction::from_fn(g.clone(), |x| x.exp()).unwrap();
        assert_eq!(restrict_to_sensors(&u, &g).unwrap(), u.values());
        let c = InputFunction::constant(g, 4.5).unwrap();
        let sensors = SensorGrid::new(0.0, 1.0, vec![0.0, 0.123, 0.5, 0.77, 1.0]).unwrap();
        assert_eq!(restrict_to_sensors(&c, &sensors).unwrap(), vec![4.5; 5]);
        let out = SensorGrid::new(0.0, 2.0, vec![0.0, 1.5]).unwrap();
        assert!(restrict_to_sensors(&c, &out).is_err());
    }

    #[test]
    fn csv_export() {
        let g = Arc::new(SensorGrid::uniform(0.0, 1.0, 3).unwrap());
        let u = InputFunction::from_fn(g, |x| 2.0 * x).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,u\n0,0\n0.5,1\n1,2\n");
    }
}
