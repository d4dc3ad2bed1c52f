//! Error metrics in physical units: RMSE, RRMSE with explicit zero rules,
//! relative-error distributions and high-error counts.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;

/// Magnitudes below this are treated as exact zeros.
pub const ZERO_THRESHOLD: f64 = 1e-300;
/// Default cut-off for counting high-error predictions.
pub const DEFAULT_THRESHOLD: f64 = 0.10;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: targets {targets:?}, predictions {predictions:?}")]
    Shape {
        targets: Vec<usize>,
        predictions: Vec<usize>,
    },
    #[error("no rows to evaluate")]
    Empty,
    #[error("{0} names for {1} output columns")]
    Names(usize, usize),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn check(y: &Tensor, yhat: &Tensor) -> Result<(), MetricsError> {
    if y.shape() != yhat.shape() || y.shape().len() != 2 {
        return Err(MetricsError::Shape {
            targets: y.shape().to_vec(),
            predictions: yhat.shape().to_vec(),
        });
    }
    if y.rows() == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

fn is_zero(v: f64) -> bool {
    v.abs() < ZERO_THRESHOLD
}

/// Relative error of one prediction.
///
/// `(y - yhat) / y` when `y` is nonzero; otherwise 0 if the prediction is
/// also zero and 1 if it is not.
pub fn relative_error(y: f64, yhat: f64) -> f64 {
    if !is_zero(y) {
        (y - yhat) / y
    } else if is_zero(yhat) {
        0.0
    } else {
        1.0
    }
}

fn per_column(y: &Tensor, yhat: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>, MetricsError> {
    check(y, yhat)?;
    let (n, c) = (y.rows(), y.cols());
    let mut acc = vec![0.0; c];
    for r in 0..n {
        for (j, a) in acc.iter_mut().enumerate() {
            *a += f(y.get2(r, j), yhat.get2(r, j));
        }
    }
    Ok(acc.into_iter().map(|s| (s / n as f64).sqrt()).collect())
}

/// Root mean squared error of each output column.
pub fn rmse(y: &Tensor, yhat: &Tensor) -> Result<Vec<f64>, MetricsError> {
    per_column(y, yhat, |a, b| (a - b) * (a - b))
}

/// Root mean squared [`relative_error`] of each output column.
pub fn rrmse(y: &Tensor, yhat: &Tensor) -> Result<Vec<f64>, MetricsError> {
    per_column(y, yhat, |a, b| relative_error(a, b).powi(2))
}

/// Box-plot summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
    pub max: f64,
}

/// Quantile `p` of sorted data, interpolating linearly between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quantiles {
    /// Quartiles with whiskers at the most extreme points within 1.5 IQR.
    pub fn of(values: &[f64]) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&s, 0.25);
        let q3 = quantile_sorted(&s, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let lower_whisker = s.iter().copied().find(|&v| v >= lo_fence).unwrap_or(q1);
        let upper_whisker = s.iter().rev().copied().find(|&v| v <= hi_fence).unwrap_or(q3);
        Ok(Self {
            min: s[0],
            lower_whisker,
            q1,
            median: quantile_sorted(&s, 0.5),
            q3,
            upper_whisker,
            max: s[s.len() - 1],
        })
    }
}

/// Distribution of `|relative_error|` for one output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub quantiles: Quantiles,
    /// Number of predictions with `|e| > threshold`.
    pub exceedance: usize,
    pub n: usize,
}

pub fn relative_error_distribution(y: &[f64], yhat: &[f64], threshold: f64) -> Result<ErrorDistribution, MetricsError> {
    if y.len() != yhat.len() {
        return Err(MetricsError::Shape {
            targets: vec![y.len()],
            predictions: vec![yhat.len()],
        });
    }
    let e: Vec<f64> = y.iter().zip(yhat).map(|(&a, &b)| relative_error(a, b).abs()).collect();
    Ok(ErrorDistribution {
        quantiles: Quantiles::of(&e)?,
        exceedance: e.iter().filter(|&&v| v > threshold).count(),
        n: e.len(),
    })
}

/// Metrics of one output column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputErrors {
    pub name: String,
    pub rmse: f64,
    pub rrmse: f64,
    pub relative_error: ErrorDistribution,
}

/// Test-set errors for every output of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub n: usize,
    pub threshold: f64,
    pub outputs: Vec<OutputErrors>,
    /// Sum of per-output exceedances.
    pub total_exceedance: usize,
    /// `total_exceedance` over all `n * outputs` predictions.
    pub exceedance_fraction: f64,
    pub mean_rmse: f64,
    pub mean_rrmse: f64,
}

impl ErrorReport {
    pub fn compute(names: &[String], y: &Tensor, yhat: &Tensor, threshold: f64) -> Result<Self, MetricsError> {
        check(y, yhat)?;
        if names.len() != y.cols() {
            return Err(MetricsError::Names(names.len(), y.cols()));
        }
        let rm = rmse(y, yhat)?;
        let rr = rrmse(y, yhat)?;
        let n = y.rows();
        let mut outputs = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let a: Vec<f64> = (0..n).map(|r| y.get2(r, j)).collect();
            let b: Vec<f64> = (0..n).map(|r| yhat.get2(r, j)).collect();
            outputs.push(OutputErrors {
                name: name.clone(),
                rmse: rm[j],
                rrmse: rr[j],
                relative_error: relative_error_distribution(&a, &b, threshold)?,
            });
        }
        let total_exceedance = outputs.iter().map(|o| o.relative_error.exceedance).sum();
        let k = outputs.len() as f64;
        Ok(Self {
            n,
            threshold,
            total_exceedance,
            exceedance_fraction: total_exceedance as f64 / (n as f64 * k),
            mean_rmse: rm.iter().sum::<f64>() / k,
            mean_rrmse: rr.iter().sum::<f64>() / k,
            outputs,
        })
    }

    pub fn rmse(&self) -> Vec<f64> {
        self.outputs.iter().map(|o| o.rmse).collect()
    }

    pub fn rrmse(&self) -> Vec<f64> {
        self.outputs.iter().map(|o| o.rrmse).collect()
    }

    /// Largest per-output median of `|relative error|`.
    pub fn worst_median(&self) -> f64 {
        self.outputs
            .iter()
            .map(|o| o.relative_error.quantiles.median)
            .fold(0.0, f64::max)
    }

    /// One row per output: name, RMSE, RRMSE, median and exceedance count.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("output,rmse,rrmse,median_rel_error,exceedance,n\n");
        for o in &self.outputs {
            writeln!(
                s,
                "{},{:?},{:?},{:?},{},{}",
                o.name, o.rmse, o.rrmse, o.relative_error.quantiles.median, o.relative_error.exceedance, o.relative_error.n
            )
            .expect("write to string");
        }
        s
    }

    /// Box-plot data: one row of quantiles per output.
    pub fn quantiles_csv(&self) -> String {
        let mut s = String::from("output,min,lower_whisker,q1,median,q3,upper_whisker,max\n");
        for o in &self.outputs {
            let q = &o.relative_error.quantiles;
            writeln!(
                s,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                o.name, q.min, q.lower_whisker, q.q1, q.median, q.q3, q.upper_whisker, q.max
            )
            .expect("write to string");
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<stem>.csv`, `<stem>_quantiles.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(), MetricsError> {
        for (name, text) in [
            (format!("{stem}.csv"), self.to_csv()),
            (format!("{stem}_quantiles.csv"), self.quantiles_csv()),
            (format!("{stem}.json"), self.to_json()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|source| MetricsError::Io { path, source })?;
        }
        Ok(())
    }
}

/// Improvement of `b` over `a` in percent, `100 (a - b) / a`.
pub fn improvement(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        100.0 * (a - b) / a
    }
}

/// Per-output improvements of report `b` over baseline `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub outputs: Vec<String>,
    pub rmse_improvement: Vec<f64>,
    pub rrmse_improvement: Vec<f64>,
    pub mean_rmse_improvement: f64,
    pub mean_rrmse_improvement: f64,
    /// Outputs on which `b` has the strictly lower RMSE.
    pub rmse_wins: usize,
}

pub fn compare_reports(a: &ErrorReport, b: &ErrorReport) -> Result<Comparison, MetricsError> {
    if a.outputs.len() != b.outputs.len() {
        return Err(MetricsError::Shape {
            targets: vec![a.outputs.len()],
            predictions: vec![b.outputs.len()],
        });
    }
    let rmse_improvement: Vec<f64> = a.outputs.iter().zip(&b.outputs).map(|(x, y)| improvement(x.rmse, y.rmse)).collect();
    let rrmse_improvement: Vec<f64> = a.outputs.iter().zip(&b.outputs).map(|(x, y)| improvement(x.rrmse, y.rrmse)).collect();
    let k = rmse_improvement.len().max(1) as f64;
    Ok(Comparison {
        outputs: a.outputs.iter().map(|o| o.name.clone()).collect(),
        mean_rmse_improvement: rmse_improvement.iter().sum::<f64>() / k,
        mean_rrmse_improvement: rrmse_improvement.iter().sum::<f64>() / k,
        rmse_wins: a.outputs.iter().zip(&b.outputs).filter(|(x, y)| y.rmse < x.rmse).count(),
        rmse_improvement,
        rrmse_improvement,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&col(&[1.0, 2.0]), &col(&[1.0, 2.0])).unwrap(), vec![0.0]);
        assert_eq!(rmse(&col(&[0.0, 0.0]), &col(&[1.0, 1.0])).unwrap(), vec![1.0]);
        assert!(matches!(rmse(&col(&[]), &col(&[])), Err(MetricsError::Empty)));
        assert!(rmse(&col(&[1.0]), &col(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn columns_are_independent() {
        let y = Tensor::from_rows(&[vec![1.0, 5.0], vec![2.0, 6.0]]).unwrap();
        let p = Tensor::from_rows(&[vec![1.0, 9.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(rmse(&y, &p).unwrap(), vec![0.0, 4.0]);
    }

    #[test]
    fn zero_rules() {
        assert_eq!(relative_error(0.0, 0.1), 1.0);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert_eq!(relative_error(2.0, 0.0), 1.0);
        assert_eq!(relative_error(1e-320, 0.0), 0.0);
        assert_eq!(rrmse(&col(&[0.0]), &col(&[0.1])).unwrap(), vec![1.0]);
        assert_eq!(rrmse(&col(&[2.0]), &col(&[1.0])).unwrap(), vec![0.5]);
    }

    #[test]
    fn table_improvement() {
        let v = improvement(3.3071e-3, 1.8907e-3);
        assert_eq!(format!("{v:.2}"), "42.83");
        assert_eq!(improvement(1.0, 0.0), 100.0);
        assert_eq!(improvement(0.7, 0.7), 0.0);
    }

    #[test]
    fn interpolated_quantiles_and_whiskers() {
        let q = Quantiles::of(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (2.0, 3.0, 4.0));
        assert_eq!(q.upper_whisker, 4.0);
        assert_eq!(q.max, 100.0);
        assert_eq!(quantile_sorted(&[0.0, 1.0], 0.25), 0.25);
    }

    #[test]
    fn exceedance_counts() {
        let y = vec![1.0; 5000];
        let mut p = vec![1.0; 5000];
        for v in p.iter_mut().take(37) {
            *v = 1.2;
        }
        let d = relative_error_distribution(&y, &p, 0.10).unwrap();
        assert_eq!(d.exceedance, 37);
        assert_eq!(relative_error_distribution(&y, &p, f64::INFINITY).unwrap().exceedance, 0);
        let exact = relative_error_distribution(&y, &y, 0.1).unwrap();
        assert_eq!(exact.exceedance, 0);
        assert_eq!(exact.quantiles.max, 0.0);
    }

    #[test]
    fn identical_reports_compare_to_zero() {
        let names = vec!["a".to_string()];
        let r = ErrorReport::compute(&names, &col(&[1.0, 2.0]), &col(&[1.5, 2.0]), 0.1).unwrap();
        let c = compare_reports(&r, &r).unwrap();
        assert_eq!(c.rmse_improvement, vec![0.0]);
        assert_eq!(c.rmse_wins, 0);
        assert!(r.to_csv().starts_with("output,rmse"));
        let back: ErrorReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn permutation_invariance(v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50), rot in 0usize..50) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
            let k = rot % a.len();
            let mut ar = a.clone();
            ar.rotate_left(k);
            let mut br = b.clone();
            br.rotate_left(k);
            let r1 = rmse(&col(&a), &col(&b)).unwrap()[0];
            let r2 = rmse(&col(&ar), &col(&br)).unwrap()[0];
            prop_assert!((r1 - r2).abs() <= 1e-12 * r1.max(1.0));
            let q1 = rrmse(&col(&a), &col(&b)).unwrap()[0];
            let q2 = rrmse(&col(&ar), &col(&br)).unwrap()[0];
            prop_assert!((q1 - q2).abs() <= 1e-12 * q1.max(1.0));
            prop_assert!(r1 >= 0.0 && q1 >= 0.0);
        }
    }
}
