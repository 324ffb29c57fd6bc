use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::report::{config_hash, ExperimentReport};
use super::train::{evaluate, train, TrainConfig};
use crate::dataset::{build_ode_dataset_ids, build_pde_dataset_ids, Dataset, OdeBuildOptions, Problem};
use crate::deeponet::{read_model, write_model, DeepOnet, DeepOnetConfig, FnnBaseline, IndexedData, Variant, MODEL_MAGIC};
use crate::error::{invalid, Error, Result};
use crate::nn::{read_params, write_params, Activation, PARAMS_MAGIC};
use crate::solvers::PdeConfig;
use crate::spaces::InputSpace;

/// Which data a run trains and tests on.
///
/// Training functions have ids `0..train_u`, test functions
/// `train_u..train_u + test_u`, all drawn under `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub problem: Problem,
    pub space: InputSpace,
    pub m: usize,
    pub train_u: usize,
    pub test_u: usize,
    /// Query locations per training function (1 for the ODE cases, P for the PDE).
    pub train_points: usize,
    pub test_points: usize,
    pub seed: u64,
}

impl DataSpec {
    fn build(&self, space: InputSpace, ids: std::ops::Range<u64>, points: usize) -> Result<Dataset> {
        match self.problem {
            Problem::DiffusionReaction { diffusion, reaction } => {
                let cfg = PdeConfig {
                    diffusion,
                    reaction,
                    ..PdeConfig::default()
                };
                build_pde_dataset_ids(&cfg, space, self.m, ids, points, self.seed)
            }
            _ => build_ode_dataset_ids(self.problem, space, self.m, ids, points, self.seed, &OdeBuildOptions::default()),
        }
    }

    pub fn build_train(&self) -> Result<Dataset> {
        self.build(self.space, 0..self.train_u as u64, self.train_points)
    }

    /// Test functions drawn from `space`, which may differ from the training space.
    pub fn build_test_in(&self, space: InputSpace) -> Result<Dataset> {
        let start = self.train_u as u64;
        self.build(space, start..start + self.test_u as u64, self.test_points)
    }

    pub fn build_test(&self) -> Result<Dataset> {
        self.build_test_in(self.space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Deeponet {
        variant: Variant,
        trunk_depth: usize,
        trunk_width: usize,
        branch_depth: usize,
        branch_width: usize,
        /// Branch biases and the output bias together.
        bias: bool,
        #[serde(default = "relu")]
        branch_activation: Activation,
    },
    Fnn {
        /// Hidden layers.
        depth: usize,
        width: usize,
        activation: Activation,
    },
}

fn relu() -> Activation {
    Activation::Relu
}

impl ModelSpec {
    pub fn deeponet(variant: Variant, trunk: (usize, usize), branch: (usize, usize), bias: bool) -> Self {
        ModelSpec::Deeponet {
            variant,
            trunk_depth: trunk.0,
            trunk_width: trunk.1,
            branch_depth: branch.0,
            branch_width: branch.1,
            bias,
            branch_activation: Activation::Relu,
        }
    }

    pub fn build(&self, m: usize, dim_y: usize, seed: u64) -> Result<TrainedModel> {
        Ok(match *self {
            ModelSpec::Deeponet {
                variant,
                trunk_depth,
                trunk_width,
                branch_depth,
                branch_width,
                bias,
                branch_activation,
            } => {
                let mut cfg = DeepOnetConfig::new(variant, m, dim_y, (trunk_depth, trunk_width), (branch_depth, branch_width))
                    .with_bias(bias);
                cfg.branch_activation = branch_activation;
                TrainedModel::DeepOnet(DeepOnet::init(cfg, seed)?)
            }
            ModelSpec::Fnn { depth, width, activation } => {
                TrainedModel::Fnn(FnnBaseline::init(m, dim_y, depth, width, activation, seed)?)
            }
        })
    }
}

/// Either kind of trainable operator model.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    DeepOnet(DeepOnet),
    Fnn(FnnBaseline),
}

impl TrainedModel {
    pub fn train(&mut self, train_set: &IndexedData, test_set: &IndexedData, cfg: &TrainConfig) -> Result<ExperimentReport> {
        match self {
            TrainedModel::DeepOnet(m) => train(m, train_set, test_set, cfg),
            TrainedModel::Fnn(m) => train(m, train_set, test_set, cfg),
        }
    }

    pub fn evaluate(&self, data: &IndexedData, trim: f64) -> Result<f64> {
        match self {
            TrainedModel::DeepOnet(m) => evaluate(m, data, trim),
            TrainedModel::Fnn(m) => evaluate(m, data, trim),
        }
    }

    pub fn predict(&self, data: &IndexedData) -> Result<Vec<f64>> {
        use crate::deeponet::OperatorModel;
        match self {
            TrainedModel::DeepOnet(m) => m.predict(&data.batch()),
            TrainedModel::Fnn(m) => m.predict(&data.batch()),
        }
    }

    pub fn m(&self) -> usize {
        use crate::deeponet::OperatorModel;
        match self {
            TrainedModel::DeepOnet(m) => m.m(),
            TrainedModel::Fnn(m) => m.m(),
        }
    }

    /// DeepONets use the OPDN1 container, FNNs a bare OPNT1 parameter file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        match self {
            TrainedModel::DeepOnet(m) => write_model(&mut w, m),
            TrainedModel::Fnn(m) => write_params(&mut w, m.net()),
        }
    }

    /// `dim_y` is only consulted for FNN files, whose input layer mixes
    /// sensors and location.
    pub fn load(path: impl AsRef<Path>, dim_y: usize) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.starts_with(MODEL_MAGIC) {
            Ok(TrainedModel::DeepOnet(read_model(&mut bytes.as_slice())?))
        } else if bytes.starts_with(PARAMS_MAGIC) {
            let net = read_params(&mut bytes.as_slice())?;
            let m = net
                .input_dim()
                .checked_sub(dim_y)
                .filter(|&m| m > 0)
                .ok_or_else(|| Error::Format(format!("FNN input width {} too small for dim_y {dim_y}", net.input_dim())))?;
            Ok(TrainedModel::Fnn(FnnBaseline::from_params(m, dim_y, net)?))
        } else {
            Err(Error::Format("unrecognized model file".into()))
        }
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub label: String,
    pub data: DataSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub model_seed: u64,
    /// Extra test sets from other spaces, evaluated once after training.
    #[serde(default)]
    pub extra_tests: Vec<ExtraTest>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraTest {
    pub name: String,
    pub space: InputSpace,
}

impl RunSpec {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Shifts every seed by `r`, giving an independent replicate.
    pub fn replicate(&self, r: u64) -> RunSpec {
        let mut s = self.clone();
        s.data.seed = s.data.seed.wrapping_add(r);
        s.model_seed = s.model_seed.wrapping_add(r);
        s.train.seed = s.train.seed.wrapping_add(r);
        s
    }

    pub fn hash(&self) -> Result<String> {
        Ok(config_hash(&serde_json::to_value(self)?))
    }
}

pub struct PreparedData {
    pub train: IndexedData,
    pub test: IndexedData,
    pub dropped: usize,
}

/// Datasets shared between runs with equal [`DataSpec`]s.
#[derive(Default)]
pub struct DataCache {
    entries: Mutex<HashMap<String, Arc<PreparedData>>>,
}

impl DataCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, spec: &DataSpec) -> Result<Arc<PreparedData>> {
        let key = serde_json::to_string(spec)?;
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let train = spec.build_train()?;
        let test = spec.build_test()?;
        let prepared = Arc::new(PreparedData {
            dropped: train.dropped() + test.dropped(),
            train: IndexedData::from_dataset(&train),
            test: IndexedData::from_dataset(&test),
        });
        self.entries
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| prepared.clone());
        Ok(prepared)
    }
}

pub struct RunOutcome {
    pub report: ExperimentReport,
    pub model: TrainedModel,
}

/// Builds (or reuses) the data, trains the model and assembles the report.
pub fn run_point(spec: &RunSpec, cache: &DataCache) -> Result<RunOutcome> {
    if spec.data.test_u == 0 || spec.data.train_u == 0 {
        return Err(invalid("runs need at least one training and one test function"));
    }
    let data = cache.get(&spec.data)?;
    let mut model = spec.model.build(spec.data.m, spec.data.problem.dim_y(), spec.model_seed)?;
    let mut report = model.train(&data.train, &data.test, &spec.train)?;
    for extra in &spec.extra_tests {
        let set = IndexedData::from_dataset(&spec.data.build_test_in(extra.space)?);
        report.extra_test_mse.insert(extra.name.clone(), model.evaluate(&set, spec.train.test_trim)?);
    }
    report.label = spec.label.clone();
    report.config = serde_json::to_value(spec)?;
    report.config_hash = config_hash(&report.config);
    report.seeds.insert("data".into(), spec.data.seed);
    report.seeds.insert("init".into(), spec.model_seed);
    report.notes = spec.notes.clone();
    if data.dropped > 0 {
        report
            .notes
            .push(format!("{} records dropped from divergent reference solutions", data.dropped));
    }
    Ok(RunOutcome { report, model })
}
