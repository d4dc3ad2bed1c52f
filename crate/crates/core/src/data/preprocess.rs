use serde::{Deserialize, Serialize};

use super::DataError;
use crate::autodiff::Tensor;

/// Offset added before taking logarithms so exact zeros stay finite.
pub const LOG_EPSILON: f64 = 1e-12;

/// Scaling of one column: optional `ln(x + eps)`, then min-max to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub log: bool,
    pub epsilon: f64,
    /// Minimum and maximum of the (possibly logged) training values.
    pub min: f64,
    pub max: f64,
}

impl ColumnScaler {
    fn pre(&self, x: f64) -> f64 {
        if self.log {
            (x + self.epsilon).ln()
        } else {
            x
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (self.pre(x) - self.min) / span
        } else {
            0.0
        }
    }

    /// Inverse of [`ColumnScaler::apply`]. For logged columns, results below
    /// `epsilon` are reported as exactly zero: they are indistinguishable
    /// from the zero offset.
    pub fn invert(&self, y: f64) -> f64 {
        let v = self.min + y * (self.max - self.min);
        if self.log {
            let x = v.exp() - self.epsilon;
            if x < self.epsilon {
                0.0
            } else {
                x
            }
        } else {
            v
        }
    }
}

/// Per-column scalers for a table, fitted on the training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub columns: Vec<ColumnScaler>,
}

/// Log-transform every column except pH and temperature, and except columns
/// that hold negative values.
pub fn default_log_flags(names: &[String], data: &Tensor) -> Vec<bool> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let linear = matches!(name.as_str(), "pH" | "T_C");
            let negative = (0..data.rows()).any(|r| data.get2(r, j) < 0.0);
            !linear && !negative
        })
        .collect()
}

impl Preprocessor {
    pub fn fit(train: &Tensor, log_flags: &[bool]) -> Result<Self, DataError> {
        if train.shape().len() != 2 || train.cols() != log_flags.len() {
            return Err(DataError::Preprocess(format!(
                "{} log flags for data of shape {:?}",
                log_flags.len(),
                train.shape()
            )));
        }
        if train.rows() == 0 {
            return Err(DataError::Empty);
        }
        let mut columns = Vec::with_capacity(log_flags.len());
        for (j, &log) in log_flags.iter().enumerate() {
            let mut sc = ColumnScaler {
                log,
                epsilon: LOG_EPSILON,
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            };
            for r in 0..train.rows() {
                let x = train.get2(r, j);
                if log && x < 0.0 {
                    return Err(DataError::Preprocess(format!(
                        "column {j} has negative value {x} at row {r} but is log-transformed"
                    )));
                }
                let v = sc.pre(x);
                sc.min = sc.min.min(v);
                sc.max = sc.max.max(v);
            }
            columns.push(sc);
        }
        Ok(Self { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn check(&self, t: &Tensor) -> Result<(), DataError> {
        if t.shape().len() != 2 || t.cols() != self.columns.len() {
            return Err(DataError::Preprocess(format!(
                "fitted on {} columns, got shape {:?}",
                self.columns.len(),
                t.shape()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, t: &Tensor) -> Result<Tensor, DataError> {
        self.check(t)?;
        let c = self.columns.len();
        for (k, &v) in t.data().iter().enumerate() {
            if self.columns[k % c].log && v < 0.0 {
                return Err(DataError::Preprocess(format!(
                    "negative value {v} in log-transformed column {} (row {})",
                    k % c,
                    k / c
                )));
            }
        }
        let data = t
            .data()
            .iter()
            .enumerate()
            .map(|(k, &v)| self.columns[k % c].apply(v))
            .collect();
        Ok(Tensor::new(t.shape().to_vec(), data).expect("same shape"))
    }

    pub fn invert(&self, t: &Tensor) -> Result<Tensor, DataError> {
        self.check(t)?;
        let c = self.columns.len();
        let data = t
            .data()
            .iter()
            .enumerate()
            .map(|(k, &v)| self.columns[k % c].invert(v))
            .collect();
        Ok(Tensor::new(t.shape().to_vec(), data).expect("same shape"))
    }
}
