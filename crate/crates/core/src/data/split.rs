use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

/// Sizes of the three partitions and the seed of the row permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Row indices of each partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    pub const RADIUM_TEST: usize = 5_000;

    pub fn counts(seed: u64, train: usize, val: usize, test: usize) -> Self {
        Self { seed, train, val, test }
    }

    /// 40,000 / 5,000 / 5,000 rows.
    pub fn cement(seed: u64) -> Self {
        Self::counts(seed, 40_000, 5_000, 5_000)
    }

    /// Half of the rows for training; of the other half, 5,000 are held out
    /// for testing and the rest validate.
    pub fn radium(n: usize, seed: u64) -> Result<Self, DataError> {
        let train = n / 2;
        let rest = n - train;
        if rest < Self::RADIUM_TEST {
            return Err(DataError::SplitSize {
                needed: 2 * Self::RADIUM_TEST,
                available: n,
            });
        }
        Ok(Self::counts(seed, train, rest - Self::RADIUM_TEST, Self::RADIUM_TEST))
    }

    /// Proportional plan for datasets of any size: `train_frac` and
    /// `val_frac` of the rows (rounded down), the remainder for testing.
    pub fn fractions(n: usize, train_frac: f64, val_frac: f64, seed: u64) -> Result<Self, DataError> {
        if !(0.0..=1.0).contains(&train_frac) || !(0.0..=1.0).contains(&val_frac) || train_frac + val_frac > 1.0 {
            return Err(DataError::Invalid(format!(
                "split fractions {train_frac} and {val_frac} must be in [0, 1] and sum to at most 1"
            )));
        }
        let train = (n as f64 * train_frac).floor() as usize;
        let val = ((n as f64 * val_frac).floor() as usize).min(n - train);
        Ok(Self::counts(seed, train, val, n - train - val))
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// Seeded permutation of `0..n`, cut into train, validation and test.
    /// Every row lands in exactly one partition, so `n` must equal the plan total.
    pub fn split(&self, n: usize) -> Result<Split, DataError> {
        if n != self.total() {
            return Err(DataError::SplitSize {
                needed: self.total(),
                available: n,
            });
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let test = idx.split_off(self.train + self.val);
        let val = idx.split_off(self.train);
        Ok(Split { train: idx, val, test })
    }
}
