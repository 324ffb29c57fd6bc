use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::FitKind;
use super::run::{DataSpec, ExtraTest, ModelSpec, RunSpec};
use super::sweep::{run_plan, PresetPlan, PresetReport, SeriesPlan, SweepPlan};
use super::train::{BatchMode, LrSchedule, TrainConfig};
use crate::dataset::Problem;
use crate::deeponet::Variant;
use crate::error::{invalid, Error, Result};
use crate::nn::Activation;
use crate::spaces::InputSpace;

pub const PRESET_NAMES: [&str; 10] = [
    "linear_ode",
    "nonlinear_ode",
    "pendulum_sensors",
    "pendulum_horizon",
    "pendulum_width",
    "pendulum_datasize",
    "pendulum_inputspace",
    "fnn_gridsearch",
    "diffusion_reaction_P",
    "diffusion_reaction_nu",
];

const GRF: InputSpace = InputSpace::Grf { length_scale: 0.2 };
const SENSORS: usize = 100;
const ODE_TRAIN: usize = 10_000;
const ODE_TEST: usize = 100_000;
const PDE_GRID_POINTS: usize = 10_000;

/// Key-value overrides applied on top of a preset's defaults.
///
/// Fields a sweep varies are left to the sweep; `values` replaces the swept
/// values of single-variable sweeps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub iterations: Option<usize>,
    pub lr: Option<f64>,
    /// 0 selects full batch.
    pub batch_size: Option<usize>,
    pub eval_every: Option<usize>,
    pub seed: Option<u64>,
    pub m: Option<usize>,
    pub train_u: Option<usize>,
    pub test_u: Option<usize>,
    pub train_points: Option<usize>,
    pub test_points: Option<usize>,
    pub values: Option<Vec<f64>>,
}

impl Overrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

struct Ctx<'a> {
    desk: bool,
    ov: &'a Overrides,
    notes: Vec<String>,
}

impl Ctx<'_> {
    /// `full` at full scale, `desk` under `--desk` (logged when different).
    fn pick<T: PartialEq + std::fmt::Debug + Copy>(&mut self, what: &str, full: T, desk: T) -> T {
        if self.desk && full != desk {
            self.notes.push(format!("desk scale: {what} {full:?} -> {desk:?}"));
            desk
        } else {
            full
        }
    }

    fn seed(&self) -> u64 {
        self.ov.seed.unwrap_or(0)
    }

    fn data(&self, problem: Problem, m: usize, train: (usize, usize), test: (usize, usize)) -> DataSpec {
        DataSpec {
            problem,
            space: GRF,
            m: self.ov.m.unwrap_or(m),
            train_u: self.ov.train_u.unwrap_or(train.0),
            train_points: self.ov.train_points.unwrap_or(train.1),
            test_u: self.ov.test_u.unwrap_or(test.0),
            test_points: self.ov.test_points.unwrap_or(test.1),
            seed: self.seed(),
        }
    }

    fn train(&self, iterations: usize, batch: BatchMode, test_trim: f64) -> TrainConfig {
        TrainConfig {
            iterations: self.ov.iterations.unwrap_or(iterations),
            lr: self.ov.lr.unwrap_or(1e-3),
            batch: match self.ov.batch_size {
                Some(0) => BatchMode::Full,
                Some(b) => BatchMode::Size(b),
                None => batch,
            },
            seed: self.seed(),
            eval_every: self.ov.eval_every.unwrap_or(1000),
            test_trim,
            schedule: LrSchedule::Constant,
        }
    }

    fn spec(&self, data: DataSpec, model: ModelSpec, train: TrainConfig) -> RunSpec {
        RunSpec {
            label: String::new(),
            data,
            model,
            train,
            model_seed: self.seed(),
            extra_tests: Vec::new(),
            notes: self.notes.clone(),
        }
    }

    fn values(&self, defaults: &[f64]) -> Vec<f64> {
        self.ov.values.clone().unwrap_or_else(|| defaults.to_vec())
    }
}

fn unstacked(width: usize) -> ModelSpec {
    ModelSpec::deeponet(Variant::Unstacked, (3, width), (2, width), true)
}

fn pendulum(horizon: f64) -> Problem {
    Problem::Pendulum { k: 1.0, horizon }
}

fn diffusion_reaction() -> Problem {
    Problem::DiffusionReaction {
        diffusion: 0.01,
        reaction: 0.01,
    }
}

fn one_series(name: &str, x_label: &str, fits: Vec<FitKind>, points: Vec<(f64, RunSpec)>) -> SweepPlan {
    SweepPlan {
        name: name.into(),
        x_label: x_label.into(),
        fits,
        series: vec![SeriesPlan {
            name: "default".into(),
            points,
        }],
    }
}

fn batch_or_full(size: Option<usize>) -> BatchMode {
    size.map_or(BatchMode::Full, BatchMode::Size)
}

fn linear_ode(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let test = ctx.pick("test functions", ODE_TEST, 10_000);
    let iters = ctx.pick("iterations", 50_000, 20_000);
    let batch = batch_or_full(ctx.pick("batch size", None, Some(256)));
    let fnn_width = ctx.pick("FNN reference width", 2560, 640);
    let data = ctx.data(Problem::Antiderivative, SENSORS, (ODE_TRAIN, 1), (test, 1));
    let mut train = ctx.train(iters, batch, 0.0);
    // Final minibatch snapshots are noisy enough to swamp the bias comparison.
    if ctx.pick("learning-rate decay over the run", 1.0, 0.1) < 1.0 {
        train.schedule = LrSchedule::Exponential {
            rate: 0.1,
            every: train.iterations,
        };
    }
    let mut series = Vec::new();
    for variant in [Variant::Stacked, Variant::Unstacked] {
        for bias in [true, false] {
            let name = format!("{}_{}", variant.as_str(), if bias { "bias" } else { "nobias" });
            let model = ModelSpec::deeponet(variant, (3, 40), (2, 40), bias);
            series.push(SeriesPlan {
                name,
                points: vec![(0.0, ctx.spec(data.clone(), model, train.clone()))],
            });
        }
    }
    let fnn = ModelSpec::Fnn {
        depth: 2,
        width: fnn_width,
        activation: Activation::Relu,
    };
    series.push(SeriesPlan {
        name: "fnn_reference".into(),
        points: vec![(0.0, ctx.spec(data, fnn, train))],
    });
    vec![SweepPlan {
        name: "variants".into(),
        x_label: "variant".into(),
        fits: vec![],
        series,
    }]
}

fn nonlinear_ode(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let train_u = ctx.pick("training functions", ODE_TRAIN, 2000);
    let test = ctx.pick("test functions", ODE_TEST, 10_000);
    let iters = ctx.pick("iterations", 100_000, 10_000);
    let batch = batch_or_full(ctx.pick("batch size", None, Some(200)));
    let data = ctx.data(Problem::NonlinearOde, SENSORS, (train_u, 1), (test, 1));
    let train = ctx.train(iters, batch, 0.001);
    let series = [Variant::Stacked, Variant::Unstacked]
        .into_iter()
        .map(|v| SeriesPlan {
            name: v.as_str().into(),
            points: vec![(
                0.0,
                ctx.spec(data.clone(), ModelSpec::deeponet(v, (3, 40), (2, 40), true), train.clone()),
            )],
        })
        .collect();
    vec![SweepPlan {
        name: "variants".into(),
        x_label: "variant".into(),
        fits: vec![],
        series,
    }]
}

/// Shared pendulum scale: train set, test set, iterations, batch.
fn pendulum_scale(ctx: &mut Ctx, desk_train: usize, desk_iters: usize) -> (usize, usize, usize, BatchMode) {
    let train = ctx.pick("training functions", ODE_TRAIN, desk_train);
    let test = ctx.pick("test functions", ODE_TEST, 10_000);
    let iters = ctx.pick("iterations", 100_000, desk_iters);
    let batch = batch_or_full(ctx.pick("batch size", None, Some(1000)));
    (train, test, iters, batch)
}

fn pendulum_sensors(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let (train_u, test, iters, batch) = pendulum_scale(ctx, 5000, 20_000);
    let train = ctx.train(iters, batch, 0.0);
    let points = ctx
        .values(&[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])
        .into_iter()
        .map(|m| {
            let mut data = ctx.data(pendulum(1.0), SENSORS, (train_u, 1), (test, 1));
            data.m = m as usize;
            (m, ctx.spec(data, unstacked(40), train.clone()))
        })
        .collect();
    vec![one_series("sensors", "m", vec![FitKind::Exponential], points)]
}

fn pendulum_horizon(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let (train_u, test, iters, batch) = pendulum_scale(ctx, ODE_TRAIN, 20_000);
    let train = ctx.train(iters, batch, 0.0);
    let points = ctx
        .values(&[1.0, 2.0, 3.0, 4.0, 5.0])
        .into_iter()
        .map(|t| {
            let data = ctx.data(pendulum(t), SENSORS, (train_u, 1), (test, 1));
            (t, ctx.spec(data, unstacked(40), train.clone()))
        })
        .collect();
    vec![one_series("horizon", "T", vec![FitKind::Exponential], points)]
}

fn pendulum_width(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let (train_u, test, iters, batch) = pendulum_scale(ctx, ODE_TRAIN, 20_000);
    let train = ctx.train(iters, batch, 0.0);
    let data = ctx.data(pendulum(3.0), SENSORS, (train_u, 1), (test, 1));
    let points = ctx
        .values(&[1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0])
        .into_iter()
        .map(|w| (w, ctx.spec(data.clone(), unstacked(w as usize), train.clone())))
        .collect();
    vec![one_series("width", "width", vec![], points)]
}

fn pendulum_datasize(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let (_, test, iters, batch) = pendulum_scale(ctx, ODE_TRAIN, 20_000);
    let largest = ctx.pick("largest training set", 100_000.0, 20_000.0);
    let train = ctx.train(iters, batch, 0.0);
    let defaults: Vec<f64> = [100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0, 10_000.0, 20_000.0, 50_000.0, 100_000.0]
        .into_iter()
        .filter(|&x| x <= largest)
        .collect();
    let points = ctx
        .values(&defaults)
        .into_iter()
        .map(|n| {
            let mut data = ctx.data(pendulum(3.0), SENSORS, (1, 1), (test, 1));
            data.train_u = n as usize;
            data.train_points = 1;
            (n, ctx.spec(data, unstacked(100), train.clone()))
        })
        .collect();
    vec![one_series(
        "datasize",
        "training points",
        vec![FitKind::Exponential, FitKind::PowerLaw],
        points,
    )]
}

fn pendulum_inputspace(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let (train_u, test, iters, batch) = pendulum_scale(ctx, 5000, 10_000);
    let test = ctx.pick("input-space test functions", test, 5000);
    let sensor_counts: Vec<usize> = if ctx.desk {
        ctx.notes.push("desk scale: sensor counts [10, 20, 40, 80] -> [10, 40]".into());
        vec![10, 40]
    } else {
        vec![10, 20, 40, 80]
    };
    let train = ctx.train(iters, batch, 0.0);
    let mut sweeps = Vec::new();
    let families: [(&str, &str, Vec<f64>, fn(f64) -> InputSpace); 2] = [
        ("grf_length_scale", "l", vec![0.05, 0.1, 0.2, 0.5, 1.0], |l| InputSpace::Grf { length_scale: l }),
        ("chebyshev_bases", "N", vec![2.0, 4.0, 6.0, 8.0, 12.0, 16.0], |n| InputSpace::Chebyshev {
            degree: n as usize,
            bound: 1.0,
        }),
    ];
    for (name, x_label, xs, space) in families {
        let series = sensor_counts
            .iter()
            .map(|&m| SeriesPlan {
                name: format!("m{m}"),
                points: ctx
                    .values(&xs)
                    .into_iter()
                    .map(|x| {
                        let mut data = ctx.data(pendulum(1.0), m, (train_u, 1), (test, 1));
                        data.m = m;
                        data.space = space(x);
                        (x, ctx.spec(data, unstacked(40), train.clone()))
                    })
                    .collect(),
            })
            .collect();
        sweeps.push(SweepPlan {
            name: name.into(),
            x_label: x_label.into(),
            fits: vec![],
            series,
        });
    }
    let mut ood = ctx.spec(
        ctx.data(pendulum(1.0), SENSORS, (train_u, 1), (test, 1)),
        unstacked(40),
        train,
    );
    ood.extra_tests = [2usize, 4, 8, 16]
        .into_iter()
        .map(|n| ExtraTest {
            name: format!("chebyshev_N{n}"),
            space: InputSpace::Chebyshev { degree: n, bound: 1.0 },
        })
        .collect();
    ood.notes.push(
        "non-paper: GRF(l=0.2)-trained model evaluated on Chebyshev inputs as an out-of-distribution stand-in".into(),
    );
    sweeps.push(one_series("ood_chebyshev_nonpaper", "-", vec![], vec![(0.0, ood)]));
    sweeps
}

fn fnn_gridsearch(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let test = ctx.pick("test functions", ODE_TEST, 10_000);
    let iters = ctx.pick("iterations", 50_000, 5000);
    let batch = batch_or_full(ctx.pick("batch size", None, Some(256)));
    let widest = ctx.pick("largest width", 2560.0, 640.0);
    let data = ctx.data(Problem::Antiderivative, SENSORS, (ODE_TRAIN, 1), (test, 1));
    let widths: Vec<f64> = ctx
        .values(&(0..9).map(|k| 10.0 * f64::powi(2.0, k)).collect::<Vec<_>>())
        .into_iter()
        .filter(|&w| w <= widest)
        .collect();
    let mut series = Vec::new();
    for depth in [2usize, 3, 4] {
        for lr in [1e-2, 1e-3, 1e-4] {
            let mut train = ctx.train(iters, batch, 0.0);
            train.lr = lr;
            let points = widths
                .iter()
                .map(|&w| {
                    let model = ModelSpec::Fnn {
                        depth,
                        width: w as usize,
                        activation: Activation::Relu,
                    };
                    (w, ctx.spec(data.clone(), model, train.clone()))
                })
                .collect();
            series.push(SeriesPlan {
                name: format!("depth{depth}_lr{lr}"),
                points,
            });
        }
    }
    vec![SweepPlan {
        name: "grid".into(),
        x_label: "width".into(),
        fits: vec![],
        series,
    }]
}

/// Test function count and the training config shared by both PDE sweeps.
/// The learning rate decays tenfold over the run.
fn pde_scale(ctx: &mut Ctx) -> (usize, TrainConfig) {
    let test_u = ctx.pick("test functions (x 10000 grid points)", 100, 10);
    let iters = ctx.pick("iterations", 500_000, 20_000);
    let batch = batch_or_full(ctx.pick("batch size", None, Some(1000)));
    let mut train = ctx.train(iters, batch, 0.0);
    train.schedule = LrSchedule::Exponential {
        rate: 0.1,
        every: train.iterations,
    };
    (test_u, train)
}

/// Width-100 unstacked net with a tanh branch, which trains several times faster
/// than relu on this problem.
fn pde_model() -> ModelSpec {
    let mut model = unstacked(100);
    if let ModelSpec::Deeponet { branch_activation, .. } = &mut model {
        *branch_activation = Activation::Tanh;
    }
    model
}

fn diffusion_reaction_p(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let (test_u, train) = pde_scale(ctx);
    let points = ctx
        .values(&[10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0])
        .into_iter()
        .map(|p| {
            let mut data = ctx.data(diffusion_reaction(), SENSORS, (100, 1), (test_u, PDE_GRID_POINTS));
            data.train_points = p as usize;
            (p, ctx.spec(data, pde_model(), train.clone()))
        })
        .collect();
    vec![one_series(
        "points_per_function",
        "P",
        vec![FitKind::Exponential, FitKind::PowerLaw],
        points,
    )]
}

fn diffusion_reaction_nu(ctx: &mut Ctx) -> Vec<SweepPlan> {
    let (test_u, train) = pde_scale(ctx);
    let points = ctx
        .values(&[10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0])
        .into_iter()
        .map(|n| {
            let mut data = ctx.data(diffusion_reaction(), SENSORS, (1, 100), (test_u, PDE_GRID_POINTS));
            data.train_u = n as usize;
            (n, ctx.spec(data, pde_model(), train.clone()))
        })
        .collect();
    vec![one_series(
        "input_functions",
        "number of u",
        vec![FitKind::Exponential, FitKind::PowerLaw],
        points,
    )]
}

/// The sweep a preset runs, without running it.
pub fn preset_plan(name: &str, desk: bool, overrides: &Overrides) -> Result<PresetPlan> {
    let mut ctx = Ctx {
        desk,
        ov: overrides,
        notes: Vec::new(),
    };
    let sweeps = match name {
        "linear_ode" => linear_ode(&mut ctx),
        "nonlinear_ode" => nonlinear_ode(&mut ctx),
        "pendulum_sensors" => pendulum_sensors(&mut ctx),
        "pendulum_horizon" => pendulum_horizon(&mut ctx),
        "pendulum_width" => pendulum_width(&mut ctx),
        "pendulum_datasize" => pendulum_datasize(&mut ctx),
        "pendulum_inputspace" => pendulum_inputspace(&mut ctx),
        "fnn_gridsearch" => fnn_gridsearch(&mut ctx),
        "diffusion_reaction_P" => diffusion_reaction_p(&mut ctx),
        "diffusion_reaction_nu" => diffusion_reaction_nu(&mut ctx),
        other => {
            return Err(invalid(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let mut notes = ctx.notes;
    if overrides != &Overrides::default() {
        notes.push(format!("overrides: {}", serde_json::to_string(overrides)?));
    }
    Ok(PresetPlan {
        name: name.into(),
        desk,
        notes,
        sweeps,
    })
}

pub fn run_preset(name: &str, desk: bool, overrides: &Overrides, runs: usize, out: Option<&Path>) -> Result<PresetReport> {
    run_plan(&preset_plan(name, desk, overrides)?, runs, out)
}
