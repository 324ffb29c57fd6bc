use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Strictly increasing points inside a closed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGrid {
    a: f64,
    b: f64,
    points: Vec<f64>,
    #[serde(default)]
    uniform: bool,
}

impl SensorGrid {
    pub fn new(a: f64, b: f64, points: Vec<f64>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid(format!("bad domain [{a}, {b}]")));
        }
        if points.len() < 2 {
            return Err(invalid(format!("a grid needs at least 2 points, got {}", points.len())));
        }
        if points.iter().any(|p| !p.is_finite() || *p < a || *p > b) {
            return Err(invalid(format!("grid points must lie in [{a}, {b}]")));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid points must be strictly increasing"));
        }
        Ok(Self {
            a,
            b,
            points,
            uniform: false,
        })
    }

    /// `count` equispaced points from `a` to `b` inclusive.
    pub fn uniform(a: f64, b: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(invalid(format!("a grid needs at least 2 points, got {count}")));
        }
        let h = (b - a) / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|j| a + j as f64 * h).collect();
        points[count - 1] = b;
        let mut grid = Self::new(a, b, points)?;
        grid.uniform = true;
        Ok(grid)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Accepts `x` within the point span, tolerating a few ulps of overshoot
    /// at either end; returns the clamped value.
    pub(crate) fn check_in_span(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.first(), self.last());
        let tol = 1e-12 * (hi - lo).abs().max(1.0);
        if !x.is_finite() || x < lo - tol || x > hi + tol {
            return Err(Error::OutOfDomain(format!("x = {x} (span [{lo}, {hi}])")));
        }
        Ok(x.clamp(lo, hi))
    }

    /// Index `j` of the segment `[x_j, x_{j+1}]` containing `x`, which must
    /// already be inside the span.
    pub(crate) fn segment(&self, x: f64) -> usize {
        let n = self.points.len();
        let mut j = if self.uniform {
            let h = (self.b - self.a) / (n - 1) as f64;
            (((x - self.a) / h).floor().max(0.0) as usize).min(n - 2)
        } else {
            self.points.partition_point(|&p| p <= x).saturating_sub(1).min(n - 2)
        };
        // floor() can land one cell off when x sits on a node
        while j > 0 && x < self.points[j] {
            j -= 1;
        }
        while j + 2 < n && x >= self.points[j + 1] {
            j += 1;
        }
        j
    }

    /// Piecewise-linear interpolation of `values` (one per point) at `x`.
    /// Returns the stored value exactly at a node.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Result<f64> {
        if values.len() != self.points.len() {
            return Err(crate::error::shape(format!(
                "{} values for {} grid points",
                values.len(),
                self.points.len()
            )));
        }
        let x = self.check_in_span(x)?;
        Ok(self.interpolate_unchecked(values, x))
    }

    #[inline]
    pub(crate) fn interpolate_unchecked(&self, values: &[f64], x: f64) -> f64 {
        let j = self.segment(x);
        let (x0, x1) = (self.points[j], self.points[j + 1]);
        if x == x0 {
            return values[j];
        }
        if x == x1 {
            return values[j + 1];
        }
        values[j] + (values[j + 1] - values[j]) / (x1 - x0) * (x - x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SensorGrid::new(0.0, 1.0, vec![0.5]).is_err());
        assert!(SensorGrid::new(0.0, 1.0, vec![0.5, 0.5]).is_err());
        assert!(SensorGrid::new(0.0, 1.0, vec![0.2, 1.1]).is_err());
        assert!(SensorGrid::new(1.0, 0.0, vec![0.2, 0.3]).is_err());
        assert!(SensorGrid::new(0.0, 1.0, vec![0.1, 0.35, 0.9]).is_ok());
        assert!(SensorGrid::uniform(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn uniform_endpoints_and_segments() {
        let g = SensorGrid::uniform(0.0, 3.0, 1001).unwrap();
        assert_eq!(g.first(), 0.0);
        assert_eq!(g.last(), 3.0);
        for (j, &p) in g.points().iter().enumerate() {
            let s = g.segment(p);
            assert!(g.points()[s] <= p && p <= g.points()[s + 1]);
            if j + 1 < g.len() {
                assert_eq!(s, j);
            }
        }
    }

    #[test]
    fn scattered_segment_lookup() {
        let g = SensorGrid::new(0.0, 1.0, vec![0.0, 0.1, 0.5, 0.55, 1.0]).unwrap();
        assert_eq!(g.segment(0.05), 0);
        assert_eq!(g.segment(0.1), 1);
        assert_eq!(g.segment(0.52), 2);
        assert_eq!(g.segment(1.0), 3);
    }
}
