//! Loss, optimizer, learning-rate schedule, the training loop and a seeded
//! random hyperparameter search.

mod experiment;
mod optim;
mod search;

pub use experiment::{evaluate, prepare, run_experiment, ExperimentError, ExperimentResult, Prepared};
pub use optim::{Adam, PlateauScheduler, SchedulerConfig};
pub use search::{random_search, Arch, Range, SearchSpace, Trial};

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Graph, Tensor};
use crate::nn::{Network, NnError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("search space: {0}")]
    Space(String),
}

fn default_batch() -> usize {
    192
}
fn default_lr() -> f64 {
    0.01
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub initial_lr: f64,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: default_batch(),
            initial_lr: default_lr(),
            scheduler: SchedulerConfig::default(),
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let s = &self.scheduler;
        if self.batch_size < 1 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if !(s.factor > 0.0 && s.factor < 1.0) {
            return Err(TrainError::Config(format!("scheduler factor {} must lie in (0, 1)", s.factor)));
        }
        if s.patience < 1 {
            return Err(TrainError::Config("scheduler patience must be at least 1".into()));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) || !(s.min_lr >= 0.0) {
            return Err(TrainError::Config("learning rates must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Preprocessed training and validation tensors.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub x_train: Tensor,
    pub y_train: Tensor,
    pub x_val: Tensor,
    pub y_val: Tensor,
}

impl TrainData {
    fn validate(&self, net: &Network) -> Result<(), TrainError> {
        let (p, q) = (net.input_dim(), net.output_dim());
        let ok = |x: &Tensor, y: &Tensor| {
            x.shape().len() == 2 && y.shape().len() == 2 && x.rows() == y.rows() && x.cols() == p && y.cols() == q
        };
        if !ok(&self.x_train, &self.y_train) || !ok(&self.x_val, &self.y_val) {
            return Err(TrainError::Config(format!(
                "data shapes {:?}/{:?} and {:?}/{:?} do not fit a {p}->{q} network",
                self.x_train.shape(),
                self.y_train.shape(),
                self.x_val.shape(),
                self.y_val.shape()
            )));
        }
        if self.x_train.rows() == 0 || self.x_val.rows() == 0 {
            return Err(TrainError::Config("training and validation splits must be non-empty".into()));
        }
        Ok(())
    }
}

/// Mean over all entries of the squared difference.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64, TrainError> {
    if pred.shape() != target.shape() {
        return Err(AutodiffError::Dimension {
            op: "mse_loss",
            left: pred.shape().to_vec(),
            right: target.shape().to_vec(),
        }
        .into());
    }
    if pred.is_empty() {
        return Err(TrainError::Config("mse of an empty tensor".into()));
    }
    let s: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / pred.len() as f64)
}

/// Loss of `net` on a full split, without gradients.
pub fn evaluate_loss(net: &Network, x: &Tensor, y: &Tensor) -> Result<f64, TrainError> {
    mse_loss(&net.predict(x)?, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    /// Wall-clock seconds since training started.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept; 0 means the initial weights.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub seconds: f64,
    pub param_count: usize,
}

impl TrainReport {
    pub fn final_epoch(&self) -> usize {
        self.epochs.last().map_or(0, |e| e.epoch)
    }

    pub fn lr_trace(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.lr).collect()
    }

    /// `epoch,train_loss,val_loss,lr,seconds` per epoch.
    pub fn epochs_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr,seconds\n");
        for e in &self.epochs {
            writeln!(s, "{},{:?},{:?},{:?},{:.3}", e.epoch, e.train_loss, e.val_loss, e.lr, e.seconds).expect("write");
        }
        s
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct Trained {
    /// Weights with the lowest validation loss seen.
    pub best: Network,
    /// Weights after the last epoch.
    pub last: Network,
    pub report: TrainReport,
}

/// Single mini-batch update: forward, backward and an Adam step. Returns
/// the batch loss before the update.
pub fn train_step(net: &mut Network, adam: &mut Adam, x: Tensor, y: Tensor, lr: f64) -> Result<f64, TrainError> {
    let mut g = Graph::new();
    let xv = g.constant(x);
    let yv = g.constant(y);
    let fwd = net.forward(&mut g, xv)?;
    let loss = g.mse(fwd.output, yv)?;
    let value = g.value(loss).data()[0];
    if !value.is_finite() {
        return Err(TrainError::Optimizer("non-finite loss".into()));
    }
    g.backward(loss)?;
    let grads: Vec<&[f64]> = fwd
        .params
        .iter()
        .map(|&v| g.grad(v).ok_or_else(|| TrainError::Optimizer("parameter without gradient".into())))
        .collect::<Result<_, _>>()?;
    let mut params = net.params_mut();
    adam.step(&mut params, &grads, lr)?;
    Ok(value)
}

/// Trains `net` with Adam on mini-batches of the training split.
///
/// The rows are reshuffled every epoch from a generator seeded with
/// `config.seed`, the validation loss is computed once per epoch on the
/// whole validation split, and the plateau scheduler sets the next epoch's
/// rate. Runs are deterministic for a given seed.
pub fn train(net: Network, data: &TrainData, config: &TrainConfig) -> Result<Trained, TrainError> {
    config.validate()?;
    data.validate(&net)?;
    let start = Instant::now();
    let mut net = net;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new();
    let mut sched = PlateauScheduler::new(config.initial_lr, config.scheduler);
    let n = data.x_train.rows();
    let mut order: Vec<usize> = (0..n).collect();

    let mut best = net.clone();
    let mut best_val_loss = evaluate_loss(&net, &data.x_val, &data.y_val)?;
    let mut best_epoch = 0;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut lr = sched.lr();

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let xb = data.x_train.select_rows(idx);
            let yb = data.y_train.select_rows(idx);
            let loss = match train_step(&mut net, &mut adam, xb, yb, lr) {
                Ok(l) => l,
                Err(TrainError::Optimizer(_)) | Err(TrainError::Nn(NnError::NonFinite { .. })) => {
                    return Err(TrainError::NonFinite { epoch, batch });
                }
                Err(e) => return Err(e),
            };
            total += loss * idx.len() as f64;
        }
        let train_loss = total / n as f64;
        let val_loss = match evaluate_loss(&net, &data.x_val, &data.y_val) {
            Ok(v) if v.is_finite() => v,
            Ok(_) | Err(TrainError::Nn(NnError::NonFinite { .. })) => {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: order.len().div_ceil(config.batch_size),
                })
            }
            Err(e) => return Err(e),
        };
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        });
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best = net.clone();
        }
        log::debug!("epoch {epoch}: train {train_loss:.4e} val {val_loss:.4e} lr {lr:.1e}");
        lr = sched.step(val_loss);
    }
    let param_count = net.num_params();
    Ok(Trained {
        best,
        last: net,
        report: TrainReport {
            epochs,
            best_epoch,
            best_val_loss,
            seconds: start.elapsed().as_secs_f64(),
            param_count,
        },
    })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::nn::{Activation, KanConfig, MlpConfig, NetworkConfig};

    fn linear_data(n: usize, seed: u64) -> (Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            x.extend([a, b]);
            y.extend([0.5 * a - 0.25 * b + 0.1, 0.3 * b]);
        }
        (Tensor::new(vec![n, 2], x).unwrap(), Tensor::new(vec![n, 2], y).unwrap())
    }

    fn data() -> TrainData {
        let (x_train, y_train) = linear_data(256, 1);
        let (x_val, y_val) = linear_data(64, 2);
        TrainData {
            x_train,
            y_train,
            x_val,
            y_val,
        }
    }

    #[test]
    fn mse_examples() {
        let p = Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let t = Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(mse_loss(&p, &t).unwrap(), 1.0);
        assert_eq!(mse_loss(&p, &p).unwrap(), 0.0);
        let c = 3.0;
        let pc = Tensor::from_rows(&[vec![c, 2.0 * c]]).unwrap();
        let tc = Tensor::from_rows(&[vec![0.0, c]]).unwrap();
        let base = mse_loss(
            &Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap(),
            &Tensor::from_rows(&[vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        assert!((mse_loss(&pc, &tc).unwrap() - c * c * base).abs() < 1e-12);
        assert!(mse_loss(&p, &Tensor::from_rows(&[vec![0.0]]).unwrap()).is_err());
    }

    #[test]
    fn linear_model_fits_linear_data() {
        let net = Network::init(&NetworkConfig::Mlp(MlpConfig::new(2, vec![], 2, Activation::Identity)), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 32,
            initial_lr: 0.01,
            ..Default::default()
        };
        let d = data();
        let out = train(net, &d, &cfg).unwrap();
        let rmse = out.report.best_val_loss.sqrt();
        assert!(rmse <= 1e-6, "validation rmse {rmse}");
    }

    #[test]
    fn zero_epochs_keeps_the_initial_network() {
        let net = Network::init(&NetworkConfig::Kan(KanConfig::new(2, vec![3], 2, 3, 5)), 4).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = train(net.clone(), &data(), &cfg).unwrap();
        assert!(out.report.epochs.is_empty());
        assert_eq!(out.best, net);
        assert_eq!(out.report.best_epoch, 0);
    }

    #[test]
    fn same_seed_same_trace_and_best_reload() {
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 50,
            seed: 9,
            ..Default::default()
        };
        let config = NetworkConfig::Kan(KanConfig::new(2, vec![4], 2, 3, 5));
        let d = data();
        let a = train(Network::init(&config, 1).unwrap(), &d, &cfg).unwrap();
        let b = train(Network::init(&config, 1).unwrap(), &d, &cfg).unwrap();
        let strip = |r: &TrainReport| r.epochs.iter().map(|e| (e.train_loss, e.val_loss, e.lr)).collect::<Vec<_>>();
        assert_eq!(strip(&a.report), strip(&b.report));
        let reloaded = evaluate_loss(&a.best, &d.x_val, &d.y_val).unwrap();
        assert!((reloaded - a.report.best_val_loss).abs() <= 1e-12);
        let min = a.report.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert!(a.report.best_val_loss <= min);
    }

    #[test]
    fn small_step_decreases_batch_loss() {
        for seed in 0..5 {
            for config in [
                NetworkConfig::Mlp(MlpConfig::new(2, vec![5, 4], 2, Activation::Mish)),
                NetworkConfig::Kan(KanConfig::new(2, vec![3], 2, 3, 6)),
            ] {
                let mut net = Network::init(&config, seed).unwrap();
                let d = data();
                let before = evaluate_loss(&net, &d.x_train, &d.y_train).unwrap();
                let mut adam = Adam::new();
                train_step(&mut net, &mut adam, d.x_train.clone(), d.y_train.clone(), 1e-4).unwrap();
                let after = evaluate_loss(&net, &d.x_train, &d.y_train).unwrap();
                assert!(after < before, "{before} -> {after}");
            }
        }
    }

    #[test]
    fn non_finite_targets_are_reported_with_location() {
        let mut d = data();
        d.y_train.data_mut()[2 * 70] = f64::NAN;
        let net = Network::init(&NetworkConfig::Mlp(MlpConfig::new(2, vec![3], 2, Activation::Mish)), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 64,
            shuffle: false,
            ..Default::default()
        };
        match train(net, &d, &cfg) {
            Err(TrainError::NonFinite { epoch, batch }) => assert_eq!((epoch, batch), (1, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.scheduler.factor = 1.0;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let parsed: TrainConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(parsed.batch_size, 192);
        assert_eq!(parsed.initial_lr, 0.01);
    }
}
