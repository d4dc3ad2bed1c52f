use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::Tensor;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new()
    }
}

impl Adam {
    pub fn new() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update of every parameter. Nothing is modified when any gradient
    /// is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&[f64]], lr: f64) -> Result<(), TrainError> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
            return Err(TrainError::Optimizer("gradient shapes do not match the parameters".into()));
        }
        if let Some(i) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(TrainError::Optimizer(format!("non-finite gradient for parameter {i}")));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(TrainError::Optimizer("optimizer state does not match the parameters".into()));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                let gk = g[k];
                m[k] = b1 * m[k] + (1.0 - b1) * gk;
                v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                *w -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            patience: 10,
            factor: 0.1,
            min_lr: 1e-6,
        }
    }
}

/// Reduces the learning rate when the validation loss stops improving.
///
/// A loss counts as an improvement only if it is strictly below the best
/// seen. After `patience` consecutive epochs without one the rate is
/// multiplied by `factor` (never going below `min_lr`) and the count restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    config: SchedulerConfig,
    initial_lr: f64,
    reductions: i32,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, config: SchedulerConfig) -> Self {
        Self {
            config,
            initial_lr,
            reductions: 0,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// `initial_lr * factor^k`, floored at `min_lr`.
    pub fn lr(&self) -> f64 {
        (self.initial_lr * self.config.factor.powi(self.reductions)).max(self.config.min_lr.min(self.initial_lr))
    }

    pub fn reductions(&self) -> i32 {
        self.reductions
    }

    /// Records one epoch's validation loss and returns the rate for the next epoch.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.config.patience {
                if self.initial_lr * self.config.factor.powi(self.reductions) > self.config.min_lr {
                    self.reductions += 1;
                }
                self.bad_epochs = 0;
            }
        }
        self.lr()
    }
}
