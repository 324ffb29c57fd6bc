//! Mean-zero Gaussian random fields with the RBF covariance, realized on a
//! grid as `L z` where `L L^T = K + jitter I`.

use std::sync::Arc;

use ndarray::{linalg::general_mat_mul, Array2};
use rand_distr::{Distribution, StandardNormal};

use super::{InputFunction, SensorGrid, SpaceTag};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Purpose};

pub const INITIAL_JITTER: f64 = 1e-12;
pub const MAX_JITTER: f64 = 1e-4;

/// `exp(-|x1 - x2|^2 / (2 l^2))`
pub fn rbf_kernel(x1: f64, x2: f64, l: f64) -> Result<f64> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(invalid(format!("length scale must be positive, got {l}")));
    }
    let d = x1 - x2;
    Ok((-d * d / (2.0 * l * l)).exp())
}

/// Gram matrix of the RBF kernel over a set of points.
#[derive(Debug, Clone)]
pub struct RbfKernelMatrix {
    pub length_scale: f64,
    /// Kernel values without jitter.
    pub gram: Array2<f64>,
}

impl RbfKernelMatrix {
    pub fn new(points: &[f64], length_scale: f64) -> Result<Self> {
        rbf_kernel(0.0, 0.0, length_scale)?;
        let n = points.len();
        let two_l2 = 2.0 * length_scale * length_scale;
        let gram = Array2::from_shape_fn((n, n), |(i, j)| {
            let d = points[i] - points[j];
            (-d * d / two_l2).exp()
        });
        Ok(Self { length_scale, gram })
    }

    /// Lower Cholesky factor of `K + jitter I`, escalating the jitter by 10x
    /// from [`INITIAL_JITTER`] until the factorization succeeds or
    /// [`MAX_JITTER`] is exceeded. Returns the factor and the jitter used.
    pub fn factor(&self) -> Result<(Array2<f64>, f64)> {
        let mut jitter = INITIAL_JITTER;
        let mut last_detail = String::new();
        while jitter <= MAX_JITTER * (1.0 + 1e-9) {
            match cholesky_lower(&self.gram, jitter) {
                Ok(l) => return Ok((l, jitter)),
                Err(detail) => last_detail = detail,
            }
            jitter *= 10.0;
        }
        Err(Error::Factorization {
            max_jitter: MAX_JITTER,
            detail: format!(
                "n = {}, length scale {}: {last_detail}",
                self.gram.nrows(),
                self.length_scale
            ),
        })
    }
}

/// Row-oriented Cholesky of `a + jitter I`. The error string names the
/// failing pivot.
pub fn cholesky_lower(a: &Array2<f64>, jitter: f64) -> std::result::Result<Array2<f64>, String> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    let ls = l.as_slice_mut().expect("fresh array");
    for j in 0..n {
        let (head, tail) = ls.split_at_mut((j + 1) * n);
        let row_j = &mut head[j * n..(j + 1) * n];
        let d = a[[j, j]] + jitter - dot(&row_j[..j], &row_j[..j]);
        if !(d > 0.0) || !d.is_finite() {
            return Err(format!("pivot {j} is {d:e}"));
        }
        let djj = d.sqrt();
        row_j[j] = djj;
        let row_j = &head[j * n..j * n + j];
        for (k, row_i) in tail.chunks_exact_mut(n).enumerate() {
            let i = j + 1 + k;
            row_i[j] = (a[[i, j]] - dot(&row_i[..j], row_j)) / djj;
        }
    }
    Ok(l)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws GRF sample paths on a fixed grid. The factorization is computed
/// once; each sample `(seed, index)` uses its own normal stream.
#[derive(Debug, Clone)]
pub struct GrfSampler {
    length_scale: f64,
    grid: Arc<SensorGrid>,
    factor: Array2<f64>,
    jitter: f64,
}

impl GrfSampler {
    pub fn new(length_scale: f64, grid: Arc<SensorGrid>) -> Result<Self> {
        let kernel = RbfKernelMatrix::new(grid.points(), length_scale)?;
        let (factor, jitter) = kernel.factor()?;
        Ok(Self {
            length_scale,
            grid,
            factor,
            jitter,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn grid(&self) -> &Arc<SensorGrid> {
        &self.grid
    }

    fn normals(&self, seed: u64, index: u64, out: &mut [f64]) {
        let mut rng = stream(seed, Purpose::InputFunction, index);
        for z in out.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
    }

    pub fn sample(&self, seed: u64, index: u64) -> InputFunction {
        self.sample_batch(seed, index..index + 1).pop().expect("one sample")
    }

    /// Samples for consecutive indices, computed with one matrix product.
    pub fn sample_batch(&self, seed: u64, indices: std::ops::Range<u64>) -> Vec<InputFunction> {
        let n = self.grid.len();
        let count = (indices.end - indices.start) as usize;
        if count == 0 {
            return Vec::new();
        }
        // z is (count x n); paths = z L^T
        let mut z = Array2::<f64>::zeros((count, n));
        for (row, idx) in z.rows_mut().into_iter().zip(indices.clone()) {
            let mut row = row;
            self.normals(seed, idx, row.as_slice_mut().expect("row of standard array"));
        }
        let mut paths = Array2::<f64>::zeros((count, n));
        general_mat_mul(1.0, &z, &self.factor.t(), 0.0, &mut paths);
        paths
            .rows()
            .into_iter()
            .zip(indices)
            .map(|(row, idx)| {
                InputFunction::new(
                    Arc::clone(&self.grid),
                    row.to_vec(),
                    SpaceTag::Grf {
                        length_scale: self.length_scale,
                    },
                    idx,
                )
                .expect("finite GRF path")
            })
            .collect()
    }
}

/// One GRF path on `fine_grid`, deterministic in `seed`.
pub fn grf_sample(length_scale: f64, fine_grid: Arc<SensorGrid>, seed: u64) -> Result<InputFunction> {
    let sampler = GrfSampler::new(length_scale, fine_grid)?;
    let mut u = sampler.sample(seed, 0);
    u.seed = seed;
    Ok(u)
}
