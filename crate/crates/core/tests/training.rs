use deeponet::dataset::{build_ode_dataset, split_by_u, Problem};
use deeponet::deeponet::{Batch, DeepOnet, DeepOnetConfig, IndexedData, OperatorModel, Variant};
use deeponet::experiments::{evaluate, train, BatchMode, LrSchedule, TrainConfig};
use deeponet::nn::ParamSet;
use deeponet::spaces::InputSpace;
use deeponet::{Error, Result};
use ndarray::Array2;

/// A model with one scalar output offset; predicts `c` everywhere.
/// Past `blow_up` its loss turns NaN.
#[derive(Clone, Debug)]
struct Offset {
    c: [f64; 1],
    blow_up: f64,
}

impl ParamSet for Offset {
    fn param_blocks(&self) -> Vec<&[f64]> {
        vec![&self.c]
    }
    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.c]
    }
}

impl OperatorModel for Offset {
    fn m(&self) -> usize {
        2
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn predict(&self, batch: &Batch) -> Result<Vec<f64>> {
        Ok(vec![self.c[0]; batch.len()])
    }
    fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, Self)> {
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut g = 0.0;
        for &t in batch.targets {
            let r = self.c[0] - t;
            loss += r * r / n;
            g += 2.0 * r / n;
        }
        if self.c[0] > self.blow_up {
            loss = f64::NAN;
        }
        Ok((loss, Offset { c: [g], blow_up: self.blow_up }))
    }
}

fn constant_data(n: usize, value: f64) -> IndexedData {
    let u = Array2::from_shape_fn((n, 2), |(i, j)| (i + j) as f64 * 0.1);
    let y = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64);
    IndexedData::from_rows(u, y, vec![value; n]).unwrap()
}

#[test]
fn offset_model_converges_to_constant() {
    let data = constant_data(50, 0.7);
    let mut model = Offset { c: [0.0], blow_up: f64::INFINITY };
    let cfg = TrainConfig {
        iterations: 3000,
        lr: 1e-2,
        eval_every: 500,
        ..Default::default()
    };
    let report = train(&mut model, &data, &data, &cfg).unwrap();
    assert!((model.c[0] - 0.7).abs() < 1e-4, "{}", model.c[0]);
    assert!(report.final_train_mse < 1e-8);
    let iters: Vec<usize> = report.history.iter().map(|h| h.iteration).collect();
    assert_eq!(iters, vec![0, 500, 1000, 1500, 2000, 2500, 3000]);
    assert_eq!(report.gap, report.final_test_mse - report.final_train_mse);
}

#[test]
fn divergence_restores_last_good_state() {
    let data = constant_data(10, 10.0);
    let mut model = Offset { c: [0.0], blow_up: 0.5 };
    let cfg = TrainConfig {
        iterations: 100,
        lr: 0.1,
        eval_every: 2,
        ..Default::default()
    };
    let good = match train(&mut model, &data, &data, &cfg) {
        Err(Error::TrainingDiverged { iteration, loss, last_good_iteration }) => {
            assert!(loss.is_nan());
            assert!(last_good_iteration < iteration);
            assert_eq!(last_good_iteration % 2, 0);
            last_good_iteration
        }
        other => panic!("expected divergence, got {other:?}"),
    };
    // far from the optimum Adam moves by about lr per step
    assert!((model.c[0] - 0.1 * good as f64).abs() < 1e-2, "{} at {good}", model.c[0]);
}

#[test]
fn invalid_configs_rejected() {
    let data = constant_data(10, 1.0);
    let mut model = Offset { c: [0.0], blow_up: f64::INFINITY };
    let bad = [
        TrainConfig { iterations: 0, ..Default::default() },
        TrainConfig { lr: 0.0, ..Default::default() },
        TrainConfig { eval_every: 0, ..Default::default() },
        TrainConfig { batch: BatchMode::Size(0), ..Default::default() },
        TrainConfig { test_trim: 1.0, ..Default::default() },
        TrainConfig { schedule: LrSchedule::Exponential { rate: 0.0, every: 10 }, ..Default::default() },
        TrainConfig { schedule: LrSchedule::Exponential { rate: 0.5, every: 0 }, ..Default::default() },
    ];
    for cfg in bad {
        assert!(matches!(train(&mut model, &data, &data, &cfg), Err(Error::InvalidArgument(_))), "{cfg:?}");
    }
}

fn small_problem(seed: u64) -> (IndexedData, IndexedData) {
    let pool = build_ode_dataset(Problem::Antiderivative, InputSpace::Grf { length_scale: 0.2 }, 20, 300, 2, seed).unwrap();
    let (tr, te) = split_by_u(&pool, 200, 100, seed).unwrap();
    (IndexedData::from_dataset(&tr), IndexedData::from_dataset(&te))
}

#[test]
fn shape_mismatch_rejected() {
    let (tr, te) = small_problem(1);
    let cfg = DeepOnetConfig::new(Variant::Unstacked, 30, 1, (2, 8), (2, 8));
    let mut model = DeepOnet::init(cfg, 0).unwrap();
    let r = train(&mut model, &tr, &te, &TrainConfig::default());
    assert!(matches!(r, Err(Error::Shape(_))), "{r:?}");
}

#[test]
fn minibatch_training_is_deterministic_and_improves() {
    let (tr, te) = small_problem(3);
    let cfg = TrainConfig {
        iterations: 3000,
        batch: BatchMode::Size(64),
        seed: 9,
        eval_every: 1000,
        ..Default::default()
    };
    let net = DeepOnetConfig::new(Variant::Unstacked, 20, 1, (3, 16), (2, 16));
    let mut a = DeepOnet::init(net.clone(), 4).unwrap();
    let mut b = DeepOnet::init(net, 4).unwrap();
    let ra = train(&mut a, &tr, &te, &cfg).unwrap();
    let rb = train(&mut b, &tr, &te, &cfg).unwrap();
    assert_eq!(ra.history, rb.history);
    assert_eq!(ra.config_hash, rb.config_hash);
    assert_eq!(a, b);
    assert!(ra.history[3].train_mse < ra.history[1].train_mse);
    assert!(ra.history[3].train_mse < 0.5 * ra.history[0].train_mse);

    let other = TrainConfig { seed: 10, ..cfg };
    assert_ne!(train(&mut DeepOnet::init(a.config().clone(), 4).unwrap(), &tr, &te, &other).unwrap().config_hash, ra.config_hash);
}

#[test]
fn trimmed_test_error_is_no_larger() {
    let (tr, te) = small_problem(5);
    let net = DeepOnetConfig::new(Variant::Stacked, 20, 1, (2, 4), (2, 4));
    let model = DeepOnet::init(net, 2).unwrap();
    let full = evaluate(&model, &te, 0.0).unwrap();
    let trimmed = evaluate(&model, &te, 0.01).unwrap();
    assert!(trimmed <= full);
    let _ = tr;
}

#[test]
fn exponential_schedule_decays_and_round_trips() {
    let s = LrSchedule::Exponential { rate: 0.1, every: 100 };
    assert_eq!(s.lr_at(1e-3, 0), 1e-3);
    assert!((s.lr_at(1e-3, 100) - 1e-4).abs() < 1e-18);
    assert!((s.lr_at(1e-3, 50) - 1e-3 * 0.1f64.sqrt()).abs() < 1e-18);
    assert_eq!(LrSchedule::Constant.lr_at(2e-3, 10_000), 2e-3);

    let cfg = TrainConfig { schedule: s, ..Default::default() };
    let back: TrainConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    let plain: TrainConfig = toml::from_str(&toml::to_string(&TrainConfig::default()).unwrap()).unwrap();
    assert_eq!(plain.schedule, LrSchedule::Constant);
}

#[test]
fn decayed_steps_shrink() {
    // Adam moves the offset by about lr per step, so a fast decay caps the total travel.
    let data = constant_data(10, 1.0);
    let mut model = Offset { c: [0.0], blow_up: f64::INFINITY };
    let cfg = TrainConfig {
        iterations: 1000,
        lr: 1e-3,
        eval_every: 500,
        schedule: LrSchedule::Exponential { rate: 0.5, every: 10 },
        ..Default::default()
    };
    train(&mut model, &data, &data, &cfg).unwrap();
    let bound = 1e-3 / (1.0 - 0.5f64.powf(0.1));
    assert!(model.c[0] > 0.0 && model.c[0] <= bound * 1.01, "{}", model.c[0]);
}
