//! Dense feed-forward networks evaluated on row-major batches.
//!
//! Each layer computes `z = a W^T + b` followed by the activation, except the
//! last layer which applies the activation only when `final_activation` is
//! set. Weights are stored `(fan_out, fan_in)`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{invalid, shape, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => fast_tanh(z),
        }
    }

    /// Derivative expressed through the activated value `a = σ(z)`.
    /// For relu, `a > 0` iff `z > 0`, so the subgradient at 0 is 0.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

/// `exp(x)` for `x <= 0`, written without branches or libm calls so that
/// loops over it vectorize. Cody-Waite reduction, degree-13 Taylor core;
/// relative error is a few ulps.
#[inline(always)]
fn exp_nonpositive(x: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 0.693_147_180_369_123_8;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    // a comparison rather than f64::max, so NaN propagates
    let x = if x < -700.0 { -700.0 } else { x };
    let shifted = x * LOG2E + SHIFTER;
    let n = shifted - SHIFTER;
    let k = shifted.to_bits().wrapping_sub(SHIFTER.to_bits());
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let mut poly = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        poly = poly * r + c;
    }
    poly * f64::from_bits(k.wrapping_add(1023) << 52)
}

#[inline(always)]
fn fast_tanh(z: f64) -> f64 {
    let e = exp_nonpositive(-2.0 * z.abs());
    ((1.0 - e) / (1.0 + e)).copysign(z)
}

impl std::str::FromStr for Activation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(invalid(format!("unknown activation {other:?}"))),
        }
    }
}

/// Architecture of one fully-connected network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input dim, hidden dims..., output dim.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub final_activation: bool,
    /// When false the last layer's bias is pinned at zero and is not a
    /// trainable parameter.
    pub final_bias: bool,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation, final_activation: bool) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activation,
            final_activation,
            final_bias: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_final_bias(mut self, enabled: bool) -> Self {
        self.final_bias = enabled;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(invalid(format!(
                "an MLP needs at least 2 layer sizes, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(invalid(format!(
                "layer sizes must be positive, got {:?}",
                self.layer_sizes
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn applies_activation(&self, layer: usize) -> bool {
        layer + 1 < self.n_layers() || self.final_activation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `(fan_out, fan_in)`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.nrows()
    }

    /// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot_bound(&self) -> f64 {
        (6.0 / (self.fan_in() + self.fan_out()) as f64).sqrt()
    }
}

/// Weights and biases of one network. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    spec: MlpSpec,
    layers: Vec<Dense>,
}

/// Activations kept from a forward pass: `acts[0]` is the input batch and
/// `acts[l + 1]` is the output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds the input at least")
    }
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(spec, &mut rng)
    }

    pub fn init_with_rng<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        for layer in &mut params.layers {
            let bound = layer.glorot_bound();
            layer
                .weight
                .mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(params)
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Ok(Self { spec, layers })
    }

    /// Builds params from explicit layers, checking them against `spec`.
    pub fn from_layers(spec: MlpSpec, layers: Vec<Dense>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.n_layers() {
            return Err(shape(format!(
                "spec has {} layers, got {}",
                spec.n_layers(),
                layers.len()
            )));
        }
        for (l, (layer, w)) in layers.iter().zip(spec.layer_sizes.windows(2)).enumerate() {
            if layer.weight.dim() != (w[1], w[0]) || layer.bias.len() != w[1] {
                return Err(shape(format!(
                    "layer {l}: expected weight {}x{} and bias {}, got {:?} and {}",
                    w[1],
                    w[0],
                    w[1],
                    layer.weight.dim(),
                    layer.bias.len()
                )));
            }
        }
        let mut params = Self { spec, layers };
        params.standardize();
        if !params.spec.final_bias {
            params.layers.last_mut().unwrap().bias.fill(0.0);
        }
        if params.param_blocks().iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(invalid("parameters must be finite"));
        }
        Ok(params)
    }

    fn standardize(&mut self) {
        for layer in &mut self.layers {
            if !layer.weight.is_standard_layout() {
                layer.weight = layer.weight.as_standard_layout().into_owned();
            }
        }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.spec.clone()).expect("spec already validated")
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(shape(format!(
                "batch has {} columns but the network expects input dim {} (layers {:?})",
                batch.ncols(),
                self.input_dim(),
                self.spec.layer_sizes
            )));
        }
        Ok(())
    }

    fn layer_forward(&self, l: usize, input: &ArrayView2<f64>) -> Array2<f64> {
        let layer = &self.layers[l];
        let mut z = Array2::zeros((input.nrows(), layer.fan_out()));
        general_mat_mul(1.0, input, &layer.weight.t(), 0.0, &mut z);
        let bias = layer.bias.as_slice().expect("contiguous");
        let rows = z.as_slice_mut().expect("fresh array is contiguous");
        if self.spec.applies_activation(l) {
            let act = self.spec.activation;
            for row in rows.chunks_exact_mut(bias.len()) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v = act.apply(*v + b);
                }
            }
        } else {
            for row in rows.chunks_exact_mut(bias.len()) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
            }
        }
        z
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        let mut out = self.layer_forward(0, &batch);
        for l in 1..self.layers.len() {
            out = self.layer_forward(l, &out.view());
        }
        Ok(out)
    }

    pub fn forward_cached(&self, batch: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_batch(&batch)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(batch.to_owned());
        for l in 0..self.layers.len() {
            let next = self.layer_forward(l, &acts[l].view());
            acts.push(next);
        }
        Ok(ForwardCache { acts })
    }

    /// Reverse pass for a cached forward evaluation. Returns parameter
    /// gradients (same shape as `self`) and the gradient w.r.t. the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(MlpParams, Array2<f64>)> {
        let (grads, g) = self.backward_impl(cache, upstream, true)?;
        Ok((grads, g.expect("input gradient requested")))
    }

    /// Parameter gradients only; skips the input-gradient product of the first layer.
    pub fn backward_params(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<MlpParams> {
        Ok(self.backward_impl(cache, upstream, false)?.0)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
        want_input: bool,
    ) -> Result<(MlpParams, Option<Array2<f64>>)> {
        let out = cache.output();
        if cache.acts.len() != self.layers.len() + 1 || upstream.dim() != out.dim() {
            return Err(shape(format!(
                "upstream gradient {:?} does not match forward output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let mut grads = self.zeros_like();
        let mut g = upstream.to_owned();
        for l in (0..self.layers.len()).rev() {
            if self.spec.applies_activation(l) {
                let act = self.spec.activation;
                Zip::from(&mut g)
                    .and(&cache.acts[l + 1])
                    .for_each(|g, &a| *g *= act.derivative_from_output(a));
            }
            let input = &cache.acts[l];
            let gl = &mut grads.layers[l];
            general_mat_mul(1.0, &g.t(), input, 0.0, &mut gl.weight);
            gl.bias = g.sum_axis(Axis(0));
            if l == 0 && !want_input {
                return Ok((grads.finish(), None));
            }
            let mut g_in = Array2::zeros((g.nrows(), self.layers[l].fan_in()));
            general_mat_mul(1.0, &g, &self.layers[l].weight, 0.0, &mut g_in);
            g = g_in;
        }
        Ok((grads.finish(), Some(g)))
    }

    fn finish(mut self) -> Self {
        if !self.spec.final_bias {
            self.layers.last_mut().unwrap().bias.fill(0.0);
        }
        self
    }

    /// Number of trainable scalars.
    pub fn num_params(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }
}

impl ParamSet for MlpParams {
    fn param_blocks(&self) -> Vec<&[f64]> {
        let n = self.layers.len();
        let mut out = Vec::with_capacity(2 * n);
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(layer.weight.as_slice().expect("standard layout"));
            if l + 1 < n || self.spec.final_bias {
                out.push(layer.bias.as_slice().expect("contiguous"));
            }
        }
        out
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let n = self.layers.len();
        let final_bias = self.spec.final_bias;
        let mut out = Vec::with_capacity(2 * n);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            if l + 1 < n || final_bias {
                out.push(layer.bias.as_slice_mut().expect("contiguous"));
            }
        }
        out
    }
}

pub fn mlp_init(spec: MlpSpec, seed: u64) -> Result<MlpParams> {
    MlpParams::init(spec, seed)
}

pub fn mlp_forward(params: &MlpParams, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
    params.forward(batch)
}

pub fn mlp_backward(
    params: &MlpParams,
    batch: ArrayView2<f64>,
    upstream: ArrayView2<f64>,
) -> Result<(MlpParams, Array2<f64>)> {
    let cache = params.forward_cached(batch)?;
    params.backward(&cache, upstream)
}
