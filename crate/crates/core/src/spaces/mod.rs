//! Input-function spaces, sensor grids and the sensor interpolant.

mod chebyshev;
mod function;
mod grf;
mod grid;
mod interp;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use chebyshev::{chebyshev_from_coeffs, chebyshev_sample, clenshaw, ChebyshevSampler};
pub use function::{eval_at, restrict_to_sensors, InputFunction, SpaceTag};
pub use grf::{
    cholesky_lower, grf_sample, rbf_kernel, GrfSampler, RbfKernelMatrix, INITIAL_JITTER, MAX_JITTER,
};
pub use grid::SensorGrid;
pub use interp::{estimate_kappa, estimate_kappa_with, interpolate_lm, sup_interpolation_error, KappaStats};

use crate::error::Result;

/// Points of the dense grid input functions are realized on.
pub const FINE_GRID_POINTS: usize = 1001;

/// Configuration of an input-function space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpace {
    Grf { length_scale: f64 },
    Chebyshev { degree: usize, bound: f64 },
}

impl InputSpace {
    pub fn sampler(&self, grid: Arc<SensorGrid>) -> Result<Sampler> {
        Ok(match *self {
            InputSpace::Grf { length_scale } => Sampler::Grf(GrfSampler::new(length_scale, grid)?),
            InputSpace::Chebyshev { degree, bound } => {
                Sampler::Chebyshev(ChebyshevSampler::new(degree, bound, grid)?)
            }
        })
    }
}

/// A ready-to-draw sampler for either space.
#[derive(Debug, Clone)]
pub enum Sampler {
    Grf(GrfSampler),
    Chebyshev(ChebyshevSampler),
}

impl Sampler {
    pub fn sample_batch(&self, seed: u64, indices: std::ops::Range<u64>) -> Vec<InputFunction> {
        match self {
            Sampler::Grf(s) => s.sample_batch(seed, indices),
            Sampler::Chebyshev(s) => indices.map(|i| s.sample(seed, i)).collect(),
        }
    }
}
