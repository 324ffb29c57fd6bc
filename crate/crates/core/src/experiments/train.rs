use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::trimmed_mse;
use super::report::{config_hash, ExperimentReport, HistoryPoint};
use crate::deeponet::{IndexedData, OperatorModel};
use crate::error::{invalid, shape, Error, Result};
use crate::nn::{mse, AdamConfig, AdamState};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    Full,
    /// Records drawn without replacement each iteration.
    Size(usize),
}

/// Learning-rate schedule applied on top of Adam.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `lr * rate^(it / every)`, decayed continuously.
    Exponential { rate: f64, every: usize },
}

impl LrSchedule {
    pub fn lr_at(self, base: f64, iteration: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Exponential { rate, every } => base * rate.powf(iteration as f64 / every as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: f64,
    pub batch: BatchMode,
    pub seed: u64,
    /// Iterations between recorded train/test errors.
    pub eval_every: usize,
    /// Fraction of worst test records dropped from the reported test MSE.
    pub test_trim: f64,
    #[serde(default, skip_serializing_if = "is_constant")]
    pub schedule: LrSchedule,
}

fn is_constant(s: &LrSchedule) -> bool {
    *s == LrSchedule::Constant
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 50_000,
            lr: 1e-3,
            batch: BatchMode::Full,
            seed: 0,
            eval_every: 1000,
            test_trim: 0.0,
            schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.eval_every == 0 {
            return Err(invalid("evaluation cadence must be at least 1"));
        }
        if let BatchMode::Size(0) = self.batch {
            return Err(invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.test_trim) {
            return Err(invalid(format!("test trim must lie in [0, 1), got {}", self.test_trim)));
        }
        if let LrSchedule::Exponential { rate, every } = self.schedule {
            if !(rate > 0.0 && rate <= 1.0) || every == 0 {
                return Err(invalid(format!("decay needs rate in (0, 1] and a positive period, got {rate} every {every}")));
            }
        }
        Ok(())
    }
}

fn check_data<M: OperatorModel>(model: &M, data: &IndexedData, what: &str) -> Result<()> {
    data.batch()
        .validate(model.m(), model.dim_y())
        .map_err(|e| shape(format!("{what} set: {e}")))?;
    if data.is_empty() {
        return Err(invalid(format!("{what} set is empty")));
    }
    Ok(())
}

/// Mean squared error of `model` over `data`, optionally trimmed.
pub fn evaluate<M: OperatorModel>(model: &M, data: &IndexedData, trim: f64) -> Result<f64> {
    let preds = model.predict(&data.batch())?;
    if trim > 0.0 {
        trimmed_mse(&preds, data.targets(), trim)
    } else {
        mse(&preds, data.targets())
    }
}

/// Adam on the MSE for `cfg.iterations` steps, recording errors at the
/// start, every `eval_every` iterations and at the end.
///
/// On a non-finite loss or gradient the model is restored to the last
/// recorded state and `Error::TrainingDiverged` is returned.
pub fn train<M: OperatorModel>(
    model: &mut M,
    train_set: &IndexedData,
    test_set: &IndexedData,
    cfg: &TrainConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    check_data(model, train_set, "training")?;
    check_data(model, test_set, "test")?;
    let start = Instant::now();
    let mut adam = AdamState::new(model, AdamConfig::with_lr(cfg.lr))?;
    let n = train_set.len();
    let batch_size = match cfg.batch {
        BatchMode::Full => n,
        BatchMode::Size(b) => b.min(n),
    };

    let mut history = Vec::new();
    let record = |model: &M, it: usize, history: &mut Vec<HistoryPoint>| -> Result<bool> {
        let train_mse = evaluate(model, train_set, 0.0)?;
        let test_mse = evaluate(model, test_set, cfg.test_trim)?;
        history.push(HistoryPoint {
            iteration: it,
            train_mse,
            test_mse,
        });
        Ok(train_mse.is_finite() && test_mse.is_finite())
    };
    record(model, 0, &mut history)?;
    let mut last_good = (0usize, model.clone());

    for it in 1..=cfg.iterations {
        let (loss, grad) = if batch_size == n {
            model.loss_and_grad(&train_set.batch())?
        } else {
            let mut rng = stream(cfg.seed, Purpose::Minibatch, it as u64);
            let mut picks = rand::seq::index::sample(&mut rng, n, batch_size).into_vec();
            picks.sort_unstable();
            model.loss_and_grad(&train_set.subset(&picks).batch())?
        };
        if !loss.is_finite() || !grad.all_finite() {
            let (good_it, good) = last_good;
            *model = good;
            return Err(Error::TrainingDiverged {
                iteration: it,
                loss,
                last_good_iteration: good_it,
            });
        }
        adam.config.lr = cfg.schedule.lr_at(cfg.lr, it - 1);
        adam.step(model, &grad)?;
        if it % cfg.eval_every == 0 || it == cfg.iterations {
            if !record(model, it, &mut history)? || !model.all_finite() {
                let (good_it, good) = last_good;
                *model = good;
                return Err(Error::TrainingDiverged {
                    iteration: it,
                    loss: history.last().map_or(f64::NAN, |h| h.train_mse),
                    last_good_iteration: good_it,
                });
            }
            last_good = (it, model.clone());
        }
    }

    let last = *history.last().expect("history holds the initial point");
    let config = serde_json::to_value(cfg)?;
    Ok(ExperimentReport {
        label: String::new(),
        history,
        final_train_mse: last.train_mse,
        final_test_mse: last.test_mse,
        gap: last.test_mse - last.train_mse,
        fits: BTreeMap::new(),
        extra_test_mse: BTreeMap::new(),
        config_hash: config_hash(&config),
        config,
        seeds: BTreeMap::from([("minibatch".to_string(), cfg.seed)]),
        notes: Vec::new(),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
