use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig, TrainData, TrainError};
use crate::nn::{Activation, KanConfig, MlpConfig, Network, NetworkConfig};

/// Inclusive integer interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub min: usize,
    pub max: usize,
}

impl Range {
    pub fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn fixed(v: usize) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Kan,
    Mlp,
}

/// Bounds of a random architecture search. Every hidden layer of a sampled
/// network has the same width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub arch: Arch,
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Range,
    pub neurons: Range,
    /// KAN only.
    #[serde(default = "default_degree")]
    pub degree: Range,
    /// KAN only, number of grid intervals.
    #[serde(default = "default_grid")]
    pub grid: Range,
    #[serde(default = "default_batch")]
    pub batch_size: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Epochs per trial.
    #[serde(default = "default_trial_epochs")]
    pub trial_epochs: usize,
}

fn default_degree() -> Range {
    Range::new(1, 8)
}
fn default_grid() -> Range {
    Range::new(3, 15)
}
fn default_batch() -> Vec<usize> {
    vec![192]
}
fn default_activation() -> Activation {
    Activation::Mish
}
fn default_trial_epochs() -> usize {
    25
}

impl SearchSpace {
    pub const KAN_MAX_LAYERS: usize = 4;
    pub const KAN_MAX_NEURONS: usize = 24;
    pub const KAN_MAX_DEGREE: usize = 8;
    pub const KAN_MAX_GRID: usize = 15;
    pub const MLP_MAX_LAYERS: usize = 10;
    pub const MLP_MAX_NEURONS: usize = 64;

    /// The largest KAN space allowed.
    pub fn kan(input_dim: usize, output_dim: usize) -> Self {
        Self {
            arch: Arch::Kan,
            input_dim,
            output_dim,
            layers: Range::new(1, Self::KAN_MAX_LAYERS),
            neurons: Range::new(4, Self::KAN_MAX_NEURONS),
            degree: default_degree(),
            grid: default_grid(),
            batch_size: default_batch(),
            activation: default_activation(),
            trial_epochs: default_trial_epochs(),
        }
    }

    /// The largest MLP space allowed.
    pub fn mlp(input_dim: usize, output_dim: usize) -> Self {
        Self {
            arch: Arch::Mlp,
            layers: Range::new(1, Self::MLP_MAX_LAYERS),
            neurons: Range::new(4, Self::MLP_MAX_NEURONS),
            ..Self::kan(input_dim, output_dim)
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::Space(m));
        for (name, r) in [("layers", self.layers), ("neurons", self.neurons)] {
            if r.min == 0 || r.min > r.max {
                return err(format!("{name} range {}..={} is empty or starts at 0", r.min, r.max));
            }
        }
        if self.input_dim == 0 || self.output_dim == 0 {
            return err("input and output dimensions must be positive".into());
        }
        if self.batch_size.is_empty() || self.batch_size.contains(&0) {
            return err("batch_size choices must be non-empty and positive".into());
        }
        let (ml, mn) = match self.arch {
            Arch::Kan => (Self::KAN_MAX_LAYERS, Self::KAN_MAX_NEURONS),
            Arch::Mlp => (Self::MLP_MAX_LAYERS, Self::MLP_MAX_NEURONS),
        };
        if self.layers.max > ml {
            return err(format!("at most {ml} hidden layers, got {}", self.layers.max));
        }
        if self.neurons.max > mn {
            return err(format!("at most {mn} neurons per layer, got {}", self.neurons.max));
        }
        if self.arch == Arch::Kan {
            if self.degree.min == 0 || self.degree.min > self.degree.max || self.degree.max > Self::KAN_MAX_DEGREE {
                return err(format!("degree must lie in 1..={}", Self::KAN_MAX_DEGREE));
            }
            if self.grid.min < 2 || self.grid.min > self.grid.max || self.grid.max > Self::KAN_MAX_GRID {
                return err(format!("grid intervals must lie in 2..={}", Self::KAN_MAX_GRID));
            }
        }
        Ok(())
    }

    /// Draws one network config and batch size.
    pub fn sample(&self, rng: &mut impl Rng) -> (NetworkConfig, usize) {
        let hidden = vec![self.neurons.sample(rng); self.layers.sample(rng)];
        let config = match self.arch {
            Arch::Kan => {
                let degree = self.degree.sample(rng);
                let grid = self.grid.sample(rng);
                NetworkConfig::Kan(KanConfig::new(self.input_dim, hidden, self.output_dim, degree, grid))
            }
            Arch::Mlp => NetworkConfig::Mlp(MlpConfig::new(self.input_dim, hidden, self.output_dim, self.activation)),
        };
        let batch = self.batch_size[rng.random_range(0..self.batch_size.len())];
        (config, batch)
    }
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub network: NetworkConfig,
    pub batch_size: usize,
    pub param_count: usize,
    pub val_loss: f64,
    pub seconds: f64,
}

/// Samples `budget` configurations from `space`, trains each for
/// `space.trial_epochs` epochs and returns them ranked by validation loss,
/// ties broken by trial index.
///
/// Configurations and per-trial seeds are drawn up front from `seed`, so
/// the result does not depend on `jobs`. A trial that diverges is ranked
/// last with an infinite loss.
pub fn random_search(
    space: &SearchSpace,
    budget: usize,
    data: &TrainData,
    base: &TrainConfig,
    seed: u64,
    jobs: usize,
) -> Result<Vec<Trial>, TrainError> {
    space.validate()?;
    if budget == 0 {
        return Err(TrainError::Space("budget must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plans: Vec<(usize, NetworkConfig, usize, u64)> = (0..budget)
        .map(|i| {
            let (c, b) = space.sample(&mut rng);
            (i, c, b, rng.random::<u64>())
        })
        .collect();
    let run = |(index, network, batch_size, trial_seed): &(usize, NetworkConfig, usize, u64)| -> Result<Trial, TrainError> {
        let cfg = TrainConfig {
            epochs: space.trial_epochs,
            batch_size: *batch_size,
            seed: *trial_seed,
            ..base.clone()
        };
        let net = Network::init(network, *trial_seed)?;
        let param_count = net.num_params();
        let (val_loss, seconds) = match train(net, data, &cfg) {
            Ok(t) => (t.report.best_val_loss, t.report.seconds),
            Err(TrainError::NonFinite { epoch, batch }) => {
                log::warn!("trial {index} diverged at epoch {epoch}, batch {batch}");
                (f64::INFINITY, 0.0)
            }
            Err(e) => return Err(e),
        };
        log::info!("trial {index}: {} val {val_loss:.4e}", network.describe());
        Ok(Trial {
            index: *index,
            network: network.clone(),
            batch_size: *batch_size,
            param_count,
            val_loss,
            seconds,
        })
    };
    let results: Vec<Result<Trial, TrainError>> = if jobs <= 1 {
        plans.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TrainError::Config(format!("thread pool: {e}")))?;
        pool.install(|| plans.par_iter().map(run).collect())
    };
    let mut trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    trials.sort_by(|a, b| a.val_loss.total_cmp(&b.val_loss).then(a.index.cmp(&b.index)));
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn data() -> TrainData {
        let x: Vec<f64> = (0..40).map(|i| (i as f64) / 40.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let t = |v: &[f64]| Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap();
        TrainData {
            x_train: t(&x[..30]),
            y_train: t(&y[..30]),
            x_val: t(&x[30..]),
            y_val: t(&y[30..]),
        }
    }

    fn tiny(arch: Arch) -> SearchSpace {
        SearchSpace {
            layers: Range::new(1, 2),
            neurons: Range::new(2, 4),
            degree: Range::new(1, 3),
            grid: Range::new(3, 5),
            batch_size: vec![8, 16],
            trial_epochs: 2,
            ..match arch {
                Arch::Kan => SearchSpace::kan(1, 1),
                Arch::Mlp => SearchSpace::mlp(1, 1),
            }
        }
    }

    #[test]
    fn single_trial_budget() {
        let t = random_search(&tiny(Arch::Kan), 1, &data(), &TrainConfig::default(), 0, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].index, 0);
    }

    #[test]
    fn seeded_search_is_reproducible_and_job_independent() {
        let a = random_search(&tiny(Arch::Mlp), 4, &data(), &TrainConfig::default(), 3, 1).unwrap();
        let b = random_search(&tiny(Arch::Mlp), 4, &data(), &TrainConfig::default(), 3, 2).unwrap();
        let key = |t: &[Trial]| t.iter().map(|x| (x.index, x.network.clone(), x.val_loss)).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
        assert!(a.windows(2).all(|w| w[0].val_loss <= w[1].val_loss));
    }

    #[test]
    fn degenerate_space_ranks_by_index_on_ties() {
        let mut s = tiny(Arch::Kan);
        s.layers = Range::fixed(1);
        s.neurons = Range::fixed(2);
        s.degree = Range::fixed(2);
        s.grid = Range::fixed(4);
        s.batch_size = vec![8];
        s.trial_epochs = 0;
        let t = random_search(&s, 3, &data(), &TrainConfig::default(), 1, 1).unwrap();
        assert!(t.iter().all(|x| x.network == t[0].network));
        let mut sorted = t.clone();
        sorted.sort_by(|a, b| a.val_loss.total_cmp(&b.val_loss).then(a.index.cmp(&b.index)));
        assert_eq!(sorted, t);
    }

    #[test]
    fn caps_are_enforced() {
        let mut s = SearchSpace::kan(3, 8);
        s.neurons.max = 25;
        assert!(s.validate().is_err());
        let mut s = SearchSpace::kan(3, 8);
        s.degree.max = 9;
        assert!(s.validate().is_err());
        let mut s = SearchSpace::mlp(3, 8);
        s.layers.max = 11;
        assert!(s.validate().is_err());
        assert!(SearchSpace::mlp(3, 8).validate().is_ok());
        assert!(random_search(&tiny(Arch::Kan), 0, &data(), &TrainConfig::default(), 0, 1).is_err());
    }
}
