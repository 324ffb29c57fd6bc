use ndarray::{concatenate, ArrayView2, Axis};

use super::batch::Batch;
use super::model::OperatorModel;
use crate::error::{invalid, shape, Result};
use crate::nn::{Activation, MlpParams, MlpSpec, ParamSet};
use crate::rng::{stream, Purpose};

/// Plain network on the concatenation `[u(x_1..x_m), y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnBaseline {
    m: usize,
    dim_y: usize,
    net: MlpParams,
}

impl FnnBaseline {
    /// `depth` hidden layers of `width` units and a linear scalar output.
    pub fn init(m: usize, dim_y: usize, depth: usize, width: usize, activation: Activation, seed: u64) -> Result<Self> {
        if m == 0 || dim_y == 0 || width == 0 {
            return Err(invalid("FNN needs m, dim(y) and width >= 1"));
        }
        let mut sizes = vec![m + dim_y];
        sizes.extend(std::iter::repeat_n(width, depth));
        sizes.push(1);
        let spec = MlpSpec::new(sizes, activation, false)?;
        let net = MlpParams::init_with_rng(spec, &mut stream(seed, Purpose::Init, 0))?;
        Ok(FnnBaseline { m, dim_y, net })
    }

    pub fn from_params(m: usize, dim_y: usize, net: MlpParams) -> Result<Self> {
        if net.input_dim() != m + dim_y || net.output_dim() != 1 {
            return Err(shape(format!(
                "network maps {} -> {}, expected {} -> 1",
                net.input_dim(),
                net.output_dim(),
                m + dim_y
            )));
        }
        Ok(FnnBaseline { m, dim_y, net })
    }

    pub fn net(&self) -> &MlpParams {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpParams {
        &mut self.net
    }

    pub fn forward(&self, u_sensors: &[f64], y: &[f64]) -> Result<f64> {
        if u_sensors.len() != self.m || y.len() != self.dim_y {
            return Err(shape(format!(
                "got m={}, dim(y)={}; baseline expects m={}, dim(y)={}",
                u_sensors.len(),
                y.len(),
                self.m,
                self.dim_y
            )));
        }
        let row: Vec<f64> = u_sensors.iter().chain(y).copied().collect();
        let x = ArrayView2::from_shape((1, row.len()), &row).map_err(|e| shape(e.to_string()))?;
        Ok(self.net.forward(x)?[[0, 0]])
    }

    fn inputs(&self, batch: &Batch) -> Result<ndarray::Array2<f64>> {
        batch.validate(self.m, self.dim_y)?;
        let u = batch.u.select(Axis(0), batch.u_idx);
        let y = batch.y.select(Axis(0), batch.y_idx);
        concatenate(Axis(1), &[u.view(), y.view()]).map_err(|e| shape(e.to_string()))
    }
}

pub fn fnn_forward(baseline: &FnnBaseline, u_sensors: &[f64], y: &[f64]) -> Result<f64> {
    baseline.forward(u_sensors, y)
}

impl ParamSet for FnnBaseline {
    fn param_blocks(&self) -> Vec<&[f64]> {
        self.net.param_blocks()
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.param_blocks_mut()
    }
}

impl OperatorModel for FnnBaseline {
    fn m(&self) -> usize {
        self.m
    }

    fn dim_y(&self) -> usize {
        self.dim_y
    }

    fn predict(&self, batch: &Batch) -> Result<Vec<f64>> {
        Ok(self.net.forward(self.inputs(batch)?.view())?.column(0).to_vec())
    }

    fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, Self)> {
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        let x = self.inputs(batch)?;
        let cache = self.net.forward_cached(x.view())?;
        let n = batch.len() as f64;
        let mut upstream = cache.output().clone();
        let mut loss = 0.0;
        for (g, &t) in upstream.column_mut(0).iter_mut().zip(batch.targets) {
            let diff = *g - t;
            loss += diff * diff;
            *g = 2.0 * diff / n;
        }
        let net = self.net.backward_params(&cache, upstream.view())?;
        Ok((
            loss / n,
            FnnBaseline {
                m: self.m,
                dim_y: self.dim_y,
                net,
            },
        ))
    }
}
