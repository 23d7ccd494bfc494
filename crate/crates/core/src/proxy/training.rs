//! Supervised training of the proxy network with a small hyperparameter grid.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{Adam, Mlp};
use super::{ProxyModel, Signature};
use crate::error::{Error, Result};
use crate::network::Instance;

/// A volume vector and its target trailer counts over the `(s, v)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub volumes: Vec<f64>,
    pub label: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    /// Dense layers including the output layer.
    pub layers: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub batch_norm: bool,
    /// Transition point of the smooth-L1 loss.
    pub smooth_l1_beta: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            layers: 3,
            hidden: 128,
            batch_size: 32,
            epochs: 100,
            dropout: 0.1,
            batch_norm: false,
            smooth_l1_beta: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub layers: Vec<usize>,
    pub hidden: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { learning_rates: vec![1e-1, 1e-2], layers: vec![3, 4, 5], hidden: vec![128, 256] }
    }
}

impl GridSpec {
    pub fn configs(&self, base: &TrainingConfig) -> Vec<TrainingConfig> {
        let mut out = Vec::new();
        for &lr in &self.learning_rates {
            for &layers in &self.layers {
                for &hidden in &self.hidden {
                    out.push(TrainingConfig { learning_rate: lr, layers, hidden, ..*base });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ProxyModel,
    pub curve: Vec<EpochLoss>,
    pub best_validation: f64,
}

pub fn loss_curve_csv(curve: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_loss,validation_loss\n");
    for e in curve {
        let _ = writeln!(out, "{},{},{}", e.epoch, e.train, e.validation);
    }
    out
}

fn standardization(train: &[Sample], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in train {
        for (m, &v) in mean.iter_mut().zip(&s.volumes) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for s in train {
        for ((acc, &v), m) in var.iter_mut().zip(&s.volumes).zip(&mean) {
            *acc += (v - m) * (v - m) / n;
        }
    }
    let std = var.iter().map(|v| if v.sqrt() > 1e-9 { v.sqrt() } else { 1.0 }).collect();
    (mean, std)
}

/// Mean smooth-L1 loss of the model on `data` in inference mode.
pub fn evaluate_loss(model: &ProxyModel, data: &[Sample], beta: f64) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    let dim = model.signature.output_dim();
    for s in data {
        let out = model.forward_raw(&s.volumes);
        for (p, y) in out.iter().zip(&s.label) {
            total += super::mlp::smooth_l1(p - y, beta).0;
        }
    }
    total / (data.len() * dim) as f64
}

/// Trains one configuration; the returned model is the epoch with the
/// lowest validation loss (training loss when there is no validation set).
pub fn train(template: &Instance, train_set: &[Sample], val_set: &[Sample], cfg: &TrainingConfig) -> Result<Trained> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let signature = Signature::of(template);
    let (in_dim, out_dim) = (signature.num_commodities, signature.output_dim());
    for s in train_set.iter().chain(val_set) {
        if s.volumes.len() != in_dim {
            return Err(Error::DimensionMismatch { expected: in_dim, got: s.volumes.len() });
        }
        if s.label.len() != out_dim {
            return Err(Error::DimensionMismatch { expected: out_dim, got: s.label.len() });
        }
    }
    if cfg.layers < 1 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || !(cfg.smooth_l1_beta > 0.0) {
        return Err(Error::PreconditionViolated(format!("invalid training configuration {cfg:?}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sizes = vec![in_dim];
    sizes.extend(std::iter::repeat_n(cfg.hidden, cfg.layers - 1));
    sizes.push(out_dim);
    let mlp = Mlp::new(&sizes, cfg.dropout, cfg.batch_norm, &mut rng);
    let (mean, std) = standardization(train_set, in_dim);
    let mut model = ProxyModel::new(signature, template.compatibility_mask(), mlp, mean, std, *cfg);

    let norm = |s: &Sample, m: &ProxyModel| m.normalize(&s.volumes);
    let train_x: Vec<Vec<f64>> = train_set.iter().map(|s| norm(s, &model)).collect();
    let mask = model.mask.clone();
    let mut adam = Adam::new(model.mlp.num_params(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Mlp)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train_x[i].as_slice()).collect();
            let ys: Vec<&[f64]> = batch.iter().map(|&i| train_set[i].label.as_slice()).collect();
            let (loss, grad) = model.mlp.loss_and_grad(&xs, &ys, &mask, cfg.smooth_l1_beta, Some(&mut rng));
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::DivergenceDetected(format!(
                    "non-finite loss at epoch {epoch} with learning rate {}",
                    cfg.learning_rate
                )));
            }
            epoch_loss += loss * batch.len() as f64;
            let mut params = model.mlp.params();
            adam.step(&mut params, &grad);
            model.mlp.set_params(&params);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let validation = if val_set.is_empty() {
            train_loss
        } else {
            evaluate_loss(&model, val_set, cfg.smooth_l1_beta)
        };
        if !validation.is_finite() {
            return Err(Error::DivergenceDetected(format!("non-finite validation loss at epoch {epoch}")));
        }
        curve.push(EpochLoss { epoch, train: train_loss, validation });
        if best.as_ref().is_none_or(|(b, _)| validation < *b) {
            best = Some((validation, model.mlp.clone()));
        }
    }
    let best_validation = match best {
        Some((v, mlp)) => {
            model.mlp = mlp;
            v
        }
        None => evaluate_loss(&model, val_set, cfg.smooth_l1_beta),
    };
    Ok(Trained { model, curve, best_validation })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEntry {
    pub config: TrainingConfig,
    /// `None` when training diverged.
    pub best_validation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: Trained,
    pub entries: Vec<GridEntry>,
}

/// Trains every grid configuration and keeps the lowest validation loss.
/// Diverged configurations are recorded and skipped; ties go to the earlier
/// configuration.
pub fn grid_search(
    template: &Instance,
    train_set: &[Sample],
    val_set: &[Sample],
    base: &TrainingConfig,
    grid: &GridSpec,
) -> Result<GridOutcome> {
    let configs = grid.configs(base);
    let results: Vec<Result<Trained>> =
        configs.par_iter().map(|cfg| train(template, train_set, val_set, cfg)).collect();
    let mut entries = Vec::with_capacity(configs.len());
    let mut best: Option<Trained> = None;
    let mut last_err = None;
    for (cfg, res) in configs.iter().zip(results) {
        match res {
            Ok(t) => {
                entries.push(GridEntry { config: *cfg, best_validation: Some(t.best_validation) });
                if best.as_ref().is_none_or(|b| t.best_validation < b.best_validation) {
                    best = Some(t);
                }
            }
            Err(Error::DivergenceDetected(msg)) => {
                log::warn!("grid configuration {cfg:?} diverged: {msg}");
                entries.push(GridEntry { config: *cfg, best_validation: None });
                last_err = Some(Error::DivergenceDetected(msg));
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(best) => Ok(GridOutcome { best, entries }),
        None => Err(last_err.unwrap_or(Error::EmptyDataset)),
    }
}
