//! The piecewise-linear sensor interpolant `u_m` and empirical estimates of
//! its worst-case error `kappa(m, V) = max_x |u(x) - u_m(x)|`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GrfSampler, InputFunction, SensorGrid};
use crate::error::{invalid, Result};

/// `u_m(x)` through `(sensors, sensor_values)`; `x` must lie within the
/// sensor span.
pub fn interpolate_lm(sensor_values: &[f64], sensors: &SensorGrid, x: f64) -> Result<f64> {
    sensors.interpolate(sensor_values, x)
}

/// `max |u - u_m|` over the nodes of `u`'s own grid, with `u_m` built from
/// `u`'s values at `sensors`.
pub fn sup_interpolation_error(u: &InputFunction, sensors: &SensorGrid) -> Result<f64> {
    let (a, b) = u.domain();
    if sensors.first() > a || sensors.last() < b {
        return Err(invalid("sensors must span the whole domain of u"));
    }
    let sv = super::restrict_to_sensors(u, sensors)?;
    let mut worst = 0.0f64;
    for (&x, &v) in u.grid().points().iter().zip(u.values()) {
        worst = worst.max((v - sensors.interpolate_unchecked(&sv, x)).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaStats {
    pub mean: f64,
    pub max: f64,
    pub samples: usize,
}

impl KappaStats {
    fn from_errors(errors: &[f64]) -> Self {
        Self {
            mean: errors.iter().sum::<f64>() / errors.len() as f64,
            max: errors.iter().cloned().fold(0.0, f64::max),
            samples: errors.len(),
        }
    }
}

/// Sup-norm interpolation error of GRF paths on `[0, 1]` (1001-point fine
/// grid) against `u_m` on `m + 1` uniform sensors.
pub fn estimate_kappa(length_scale: f64, m: usize, n_samples: usize, seed: u64) -> Result<KappaStats> {
    let fine = Arc::new(SensorGrid::uniform(0.0, 1.0, super::FINE_GRID_POINTS)?);
    let sampler = GrfSampler::new(length_scale, fine)?;
    estimate_kappa_with(&sampler, m, n_samples, seed)
}

/// As [`estimate_kappa`] with a prebuilt sampler, so sweeps over `m` reuse
/// one factorization and the same paths.
pub fn estimate_kappa_with(sampler: &GrfSampler, m: usize, n_samples: usize, seed: u64) -> Result<KappaStats> {
    if m < 2 {
        return Err(invalid(format!("need m >= 2, got {m}")));
    }
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let (a, b) = sampler.grid().domain();
    let sensors = SensorGrid::uniform(a, b, m + 1)?;
    let mut errors = Vec::with_capacity(n_samples);
    const CHUNK: u64 = 256;
    let mut start = 0u64;
    while start < n_samples as u64 {
        let end = (start + CHUNK).min(n_samples as u64);
        for u in sampler.sample_batch(seed, start..end) {
            errors.push(sup_interpolation_error(&u, &sensors)?);
        }
        start = end;
    }
    Ok(KappaStats::from_errors(&errors))
}
