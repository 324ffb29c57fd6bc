use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::batch::Batch;
use crate::error::{invalid, shape, Result};
use crate::nn::{Activation, Dense, ForwardCache, MlpParams, MlpSpec, ParamSet};
use crate::rng::{stream, Purpose};

/// A model trainable on [`Batch`]es under the MSE loss.
pub trait OperatorModel: ParamSet + Clone {
    fn m(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn predict(&self, batch: &Batch) -> Result<Vec<f64>>;
    /// MSE over the batch and its gradient, packed in a value of the model type.
    fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, Self)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `p` independent branch nets with scalar output.
    Stacked,
    /// One branch net with `p` outputs.
    Unstacked,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Stacked => "stacked",
            Variant::Unstacked => "unstacked",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stacked" => Ok(Variant::Stacked),
            "unstacked" => Ok(Variant::Unstacked),
            other => Err(invalid(format!("unknown variant {other:?}"))),
        }
    }
}

/// Architecture of a branch-trunk network. Depth counts dense layers; the
/// trunk's last layer is activated and its width is `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeepOnetConfig {
    pub variant: Variant,
    pub m: usize,
    pub dim_y: usize,
    pub trunk_depth: usize,
    pub trunk_width: usize,
    pub branch_depth: usize,
    pub branch_width: usize,
    pub trunk_activation: Activation,
    pub branch_activation: Activation,
    /// Bias on the branch output layer.
    pub branch_bias: bool,
    /// The scalar `b0` added after the merge.
    pub output_bias: bool,
}

impl DeepOnetConfig {
    /// Tanh trunk, relu branch, both biases on.
    pub fn new(variant: Variant, m: usize, dim_y: usize, trunk: (usize, usize), branch: (usize, usize)) -> Self {
        DeepOnetConfig {
            variant,
            m,
            dim_y,
            trunk_depth: trunk.0,
            trunk_width: trunk.1,
            branch_depth: branch.0,
            branch_width: branch.1,
            trunk_activation: Activation::Tanh,
            branch_activation: Activation::Relu,
            branch_bias: true,
            output_bias: true,
        }
    }

    pub fn with_bias(mut self, enabled: bool) -> Self {
        self.branch_bias = enabled;
        self.output_bias = enabled;
        self
    }

    pub fn p(&self) -> usize {
        self.trunk_width
    }

    pub fn trunk_spec(&self) -> Result<MlpSpec> {
        if self.trunk_depth == 0 || self.trunk_width == 0 || self.dim_y == 0 {
            return Err(invalid("trunk needs depth, width and input dimension >= 1"));
        }
        let mut sizes = vec![self.dim_y];
        sizes.extend(std::iter::repeat_n(self.trunk_width, self.trunk_depth));
        MlpSpec::new(sizes, self.trunk_activation, true)
    }

    /// Spec of the unstacked branch, or of each stacked branch.
    pub fn branch_spec(&self) -> Result<MlpSpec> {
        if self.branch_depth == 0 || self.branch_width == 0 || self.m == 0 {
            return Err(invalid("branch needs depth, width and sensor count >= 1"));
        }
        let out = match self.variant {
            Variant::Stacked => 1,
            Variant::Unstacked => self.p(),
        };
        let mut sizes = vec![self.m];
        sizes.extend(std::iter::repeat_n(self.branch_width, self.branch_depth - 1));
        sizes.push(out);
        Ok(MlpSpec::new(sizes, self.branch_activation, false)?.with_final_bias(self.branch_bias))
    }

    pub fn validate(&self) -> Result<()> {
        self.trunk_spec()?;
        self.branch_spec()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    Stacked(Vec<MlpParams>),
    Unstacked(MlpParams),
}

enum BranchCache {
    Stacked(Vec<ForwardCache>),
    Unstacked(ForwardCache),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepOnet {
    config: DeepOnetConfig,
    trunk: MlpParams,
    branch: Branch,
    b0: [f64; 1],
}

/// `out_i = sum_k b[u_i, k] t[y_i, k] + b0`.
pub fn merge_outputs(b: ArrayView2<f64>, t: ArrayView2<f64>, u_idx: &[usize], y_idx: &[usize], b0: f64) -> Vec<f64> {
    let (b, t) = (b.as_standard_layout(), t.as_standard_layout());
    let p = b.ncols();
    let (bs, ts) = (b.as_slice().expect("standard layout"), t.as_slice().expect("standard layout"));
    u_idx
        .iter()
        .zip(y_idx)
        .map(|(&i, &j)| dot(&bs[i * p..(i + 1) * p], &ts[j * p..(j + 1) * p]) + b0)
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DeepOnet {
    /// Glorot-uniform weights, zero biases, `b0 = 0`.
    pub fn init(config: DeepOnetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let trunk = MlpParams::init_with_rng(config.trunk_spec()?, &mut stream(seed, Purpose::Init, 0))?;
        let spec = config.branch_spec()?;
        let branch = match config.variant {
            Variant::Unstacked => Branch::Unstacked(MlpParams::init_with_rng(spec, &mut stream(seed, Purpose::Init, 1))?),
            Variant::Stacked => Branch::Stacked(
                (0..config.p())
                    .map(|k| MlpParams::init_with_rng(spec.clone(), &mut stream(seed, Purpose::Init, 1 + k as u64)))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(DeepOnet {
            config,
            trunk,
            branch,
            b0: [0.0],
        })
    }

    pub fn from_parts(config: DeepOnetConfig, trunk: MlpParams, branch: Branch, b0: f64) -> Result<Self> {
        config.validate()?;
        if trunk.spec() != &config.trunk_spec()? {
            return Err(shape(format!("trunk {:?} does not match config", trunk.spec().layer_sizes)));
        }
        let spec = config.branch_spec()?;
        match (&branch, config.variant) {
            (Branch::Unstacked(net), Variant::Unstacked) => {
                if net.spec() != &spec {
                    return Err(shape(format!("branch {:?} does not match config", net.spec().layer_sizes)));
                }
            }
            (Branch::Stacked(nets), Variant::Stacked) => {
                if nets.len() != config.p() {
                    return Err(shape(format!("{} stacked branches for p = {}", nets.len(), config.p())));
                }
                if let Some(net) = nets.iter().find(|n| n.spec() != &spec) {
                    return Err(shape(format!(
                        "stacked branch {:?} does not match config",
                        net.spec().layer_sizes
                    )));
                }
            }
            _ => return Err(shape("branch kind does not match variant")),
        }
        if !b0.is_finite() {
            return Err(invalid("b0 must be finite"));
        }
        let b0 = if config.output_bias { b0 } else { 0.0 };
        Ok(DeepOnet {
            config,
            trunk,
            branch,
            b0: [b0],
        })
    }

    pub fn config(&self) -> &DeepOnetConfig {
        &self.config
    }

    pub fn trunk(&self) -> &MlpParams {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut MlpParams {
        &mut self.trunk
    }

    pub fn branch(&self) -> &Branch {
        &self.branch
    }

    pub fn branch_mut(&mut self) -> &mut Branch {
        &mut self.branch
    }

    pub fn b0(&self) -> f64 {
        self.b0[0]
    }

    /// Ignored when the output bias is disabled.
    pub fn set_b0(&mut self, v: f64) {
        if self.config.output_bias {
            self.b0[0] = v;
        }
    }

    pub fn p(&self) -> usize {
        self.config.p()
    }

    fn zeros_like(&self) -> Self {
        DeepOnet {
            config: self.config.clone(),
            trunk: self.trunk.zeros_like(),
            branch: match &self.branch {
                Branch::Stacked(nets) => Branch::Stacked(nets.iter().map(|n| n.zeros_like()).collect()),
                Branch::Unstacked(net) => Branch::Unstacked(net.zeros_like()),
            },
            b0: [0.0],
        }
    }

    fn branch_forward(&self, u: ArrayView2<f64>) -> Result<(BranchCache, Array2<f64>)> {
        match &self.branch {
            Branch::Unstacked(net) => {
                let cache = net.forward_cached(u)?;
                let out = cache.output().clone();
                Ok((BranchCache::Unstacked(cache), out))
            }
            Branch::Stacked(nets) => {
                let mut out = Array2::zeros((u.nrows(), nets.len()));
                let caches = nets
                    .iter()
                    .enumerate()
                    .map(|(k, net)| {
                        let cache = net.forward_cached(u)?;
                        out.column_mut(k).assign(&cache.output().column(0));
                        Ok(cache)
                    })
                    .collect::<Result<_>>()?;
                Ok((BranchCache::Stacked(caches), out))
            }
        }
    }

    /// Branch outputs `b(u)`, one row per sensor vector.
    pub fn branch_outputs(&self, u: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.branch_forward(u)?.1)
    }

    /// Trunk outputs `t(y)`, one row per location.
    pub fn trunk_outputs(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.trunk.forward(y)
    }

    /// `G(u)(y)` for one sensor vector and one location.
    pub fn forward(&self, u_sensors: &[f64], y: &[f64]) -> Result<f64> {
        let u = ArrayView2::from_shape((1, u_sensors.len()), u_sensors).map_err(|e| shape(e.to_string()))?;
        let y = ArrayView2::from_shape((1, y.len()), y).map_err(|e| shape(e.to_string()))?;
        let batch = Batch {
            u,
            y,
            u_idx: &[0],
            y_idx: &[0],
            targets: &[0.0],
        };
        Ok(self.predict(&batch)?[0])
    }

    /// Equivalent unstacked network: the stacked branches become diagonal
    /// blocks of one wide branch.
    pub fn stacked_to_unstacked_embed(&self) -> Result<DeepOnet> {
        let nets = match &self.branch {
            Branch::Stacked(nets) => nets,
            Branch::Unstacked(_) => return Err(invalid("model is already unstacked")),
        };
        let spec0 = nets[0].spec();
        if nets.iter().any(|n| n.spec() != spec0) {
            return Err(shape("stacked branches have different shapes"));
        }
        let p = nets.len();
        let depth = spec0.n_layers();
        let mut config = self.config.clone();
        config.variant = Variant::Unstacked;
        config.branch_width = if depth > 1 { p * self.config.branch_width } else { p };
        let spec = config.branch_spec()?;

        let layers = (0..depth)
            .map(|l| {
                let (fo, fi) = nets[0].layers()[l].weight.dim();
                let mut weight = if l == 0 {
                    Array2::zeros((p * fo, fi))
                } else {
                    Array2::zeros((p * fo, p * fi))
                };
                let mut bias = ndarray::Array1::zeros(p * fo);
                for (k, net) in nets.iter().enumerate() {
                    let layer = &net.layers()[l];
                    let rows = k * fo..(k + 1) * fo;
                    if l == 0 {
                        weight.slice_mut(s![rows.clone(), ..]).assign(&layer.weight);
                    } else {
                        weight.slice_mut(s![rows.clone(), k * fi..(k + 1) * fi]).assign(&layer.weight);
                    }
                    bias.slice_mut(s![rows]).assign(&layer.bias);
                }
                Dense { weight, bias }
            })
            .collect();
        let branch = MlpParams::from_layers(spec, layers)?;
        DeepOnet::from_parts(config, self.trunk.clone(), Branch::Unstacked(branch), self.b0())
    }
}

impl ParamSet for DeepOnet {
    fn param_blocks(&self) -> Vec<&[f64]> {
        let mut out = self.trunk.param_blocks();
        match &self.branch {
            Branch::Stacked(nets) => nets.iter().for_each(|n| out.extend(n.param_blocks())),
            Branch::Unstacked(net) => out.extend(net.param_blocks()),
        }
        if self.config.output_bias {
            out.push(&self.b0);
        }
        out
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.trunk.param_blocks_mut();
        match &mut self.branch {
            Branch::Stacked(nets) => nets.iter_mut().for_each(|n| out.extend(n.param_blocks_mut())),
            Branch::Unstacked(net) => out.extend(net.param_blocks_mut()),
        }
        if self.config.output_bias {
            out.push(&mut self.b0);
        }
        out
    }
}

impl OperatorModel for DeepOnet {
    fn m(&self) -> usize {
        self.config.m
    }

    fn dim_y(&self) -> usize {
        self.config.dim_y
    }

    fn predict(&self, batch: &Batch) -> Result<Vec<f64>> {
        batch.validate(self.m(), self.dim_y())?;
        let b = self.branch_outputs(batch.u)?;
        let t = self.trunk_outputs(batch.y)?;
        Ok(merge_outputs(b.view(), t.view(), batch.u_idx, batch.y_idx, self.b0()))
    }

    fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, Self)> {
        batch.validate(self.m(), self.dim_y())?;
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        let (bcache, b) = self.branch_forward(batch.u)?;
        let tcache = self.trunk.forward_cached(batch.y)?;
        let t = tcache.output();
        let p = self.p();
        let n = batch.len() as f64;

        let mut db = Array2::<f64>::zeros(b.dim());
        let mut dt = Array2::<f64>::zeros(t.dim());
        let (bs, ts) = (b.as_slice().expect("standard layout"), t.as_slice().expect("standard layout"));
        let dbs = db.as_slice_mut().expect("standard layout");
        let dts = dt.as_slice_mut().expect("standard layout");
        let mut loss = 0.0;
        let mut db0 = 0.0;
        for ((&i, &j), &target) in batch.u_idx.iter().zip(batch.y_idx).zip(batch.targets) {
            let (bi, tj) = (&bs[i * p..(i + 1) * p], &ts[j * p..(j + 1) * p]);
            let pred = dot(bi, tj) + self.b0();
            let diff = pred - target;
            loss += diff * diff;
            let r = 2.0 * diff / n;
            db0 += r;
            for k in 0..p {
                dbs[i * p + k] += r * tj[k];
                dts[j * p + k] += r * bi[k];
            }
        }

        let mut grad = self.zeros_like();
        grad.trunk = self.trunk.backward_params(&tcache, dt.view())?;
        grad.branch = match (&self.branch, bcache) {
            (Branch::Unstacked(net), BranchCache::Unstacked(cache)) => {
                Branch::Unstacked(net.backward_params(&cache, db.view())?)
            }
            (Branch::Stacked(nets), BranchCache::Stacked(caches)) => Branch::Stacked(
                nets.iter()
                    .zip(&caches)
                    .enumerate()
                    .map(|(k, (net, cache))| net.backward_params(cache, db.slice(s![.., k..k + 1])))
                    .collect::<Result<_>>()?,
            ),
            _ => unreachable!("cache kind follows branch kind"),
        };
        if self.config.output_bias {
            grad.b0 = [db0];
        }
        Ok((loss / n, grad))
    }
}

/// Free-function form of [`DeepOnet::forward`].
pub fn deeponet_forward(model: &DeepOnet, u_sensors: &[f64], y: &[f64]) -> Result<f64> {
    model.forward(u_sensors, y)
}

/// Free-function form of [`OperatorModel::loss_and_grad`].
pub fn deeponet_gradients(model: &DeepOnet, batch: &Batch) -> Result<(f64, DeepOnet)> {
    model.loss_and_grad(batch)
}

