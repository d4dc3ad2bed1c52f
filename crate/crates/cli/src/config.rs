//! Training configuration files and their resolution against flags and
//! per-case defaults.
//!
//! A config file is a JSON object whose fields are all optional:
//!
//! ```json
//! {
//!   "arch": "kan",
//!   "case": "ternary_ss",
//!   "hidden": [25, 25, 25, 25],
//!   "degree": 10,
//!   "grid": 12,
//!   "activation": "mish",
//!   "epochs": 100,
//!   "batch_size": 192,
//!   "initial_lr": 0.01,
//!   "factor": 0.2,
//!   "patience": 10,
//!   "min_lr": 1e-6,
//!   "seed": 0,
//!   "split": { "train": 16384, "val": 11384, "test": 5000 },
//!   "threshold": 0.1,
//!   "cement_mapping": "mapping.json"
//! }
//! ```
//!
//! A value given on the command line wins over the file, and the file wins
//! over the defaults of the case.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::ValueEnum;
use geokan::data::CementMapping;
use geokan::metrics::DEFAULT_THRESHOLD;
use geokan::nn::Activation;
use geokan::train::SchedulerConfig;
use geokan::{CaseStudy, Dataset, KanConfig, MlpConfig, NetworkConfig, SplitPlan, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchArg {
    Kan,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationArg {
    Mish,
    Silu,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Mish => Activation::Mish,
            ActivationArg::Silu => Activation::Silu,
        }
    }
}

/// Partition sizes; the row permutation is seeded by the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl std::str::FromStr for SplitSizes {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("expected TRAIN,VAL,TEST counts: {e}"))?;
        match parts[..] {
            [train, val, test] => Ok(Self { train, val, test }),
            _ => Err("expected three comma-separated counts TRAIN,VAL,TEST".into()),
        }
    }
}

/// Contents of a `--config` file. Every field may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch: Option<ArchArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSizes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cement_mapping: Option<PathBuf>,
}

impl TrainFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those of `self`.
    pub fn overlay(self, over: TrainFile) -> TrainFile {
        TrainFile {
            arch: over.arch.or(self.arch),
            case: over.case.or(self.case),
            hidden: over.hidden.or(self.hidden),
            degree: over.degree.or(self.degree),
            grid: over.grid.or(self.grid),
            activation: over.activation.or(self.activation),
            epochs: over.epochs.or(self.epochs),
            batch_size: over.batch_size.or(self.batch_size),
            initial_lr: over.initial_lr.or(self.initial_lr),
            factor: over.factor.or(self.factor),
            patience: over.patience.or(self.patience),
            min_lr: over.min_lr.or(self.min_lr),
            seed: over.seed.or(self.seed),
            split: over.split.or(self.split),
            threshold: over.threshold.or(self.threshold),
            cement_mapping: over.cement_mapping.or(self.cement_mapping),
        }
    }
}

/// Fully resolved training run, stored as `config.json` in the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub arch: ArchArg,
    pub case: CaseStudy,
    pub dataset: PathBuf,
    pub dataset_sha256: String,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub split: SplitPlan,
    pub threshold: f64,
    #[serde(default)]
    pub cement_mapping: Option<CementMapping>,
}

/// Default hidden layers, degree and grid of each case.
pub fn default_kan(case: CaseStudy) -> (Vec<usize>, usize, usize) {
    match case {
        CaseStudy::Cement => (vec![28; 4], 7, 10),
        CaseStudy::MechMix => (vec![24; 4], 8, 15),
        CaseStudy::BinarySs => (vec![24; 3], 8, 12),
        CaseStudy::TernarySs => (vec![25; 4], 10, 12),
    }
}

pub const DEFAULT_MLP_HIDDEN: [usize; 5] = [192; 5];

fn default_epochs(case: CaseStudy) -> usize {
    match case {
        CaseStudy::Cement => 200,
        _ => 100,
    }
}

fn default_factor(case: CaseStudy) -> f64 {
    match case {
        CaseStudy::Cement => 0.1,
        _ => 0.2,
    }
}

/// Default partition of `n` rows. The published sizes are used when the
/// dataset is large enough, otherwise proportional fractions.
pub fn default_split(case: CaseStudy, n: usize, seed: u64) -> Result<SplitPlan> {
    let plan = match case {
        CaseStudy::Cement if n == SplitPlan::cement(seed).total() => SplitPlan::cement(seed),
        CaseStudy::Cement => SplitPlan::fractions(n, 0.8, 0.1, seed)?,
        _ => SplitPlan::radium(n, seed).or_else(|_| SplitPlan::fractions(n, 0.5, 0.25, seed))?,
    };
    Ok(plan)
}

/// Reads a dataset CSV. Files written by this tool are recognised by their
/// header; anything else is read as the cement benchmark file through the
/// column mapping.
pub fn load_dataset(path: &Path, case: Option<CaseStudy>, mapping: Option<&CementMapping>) -> Result<(CaseStudy, Dataset)> {
    if !path.is_file() {
        return Err(usage(format!("dataset {} does not exist", path.display())));
    }
    let (found, data) = match Dataset::read_case_csv(path) {
        Ok(v) => v,
        Err(_) if matches!(case, None | Some(CaseStudy::Cement)) => {
            let default = CementMapping::default();
            let d = geokan::data::ingest_cement_csv(path, mapping.unwrap_or(&default))?;
            (CaseStudy::Cement, d)
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(c) = case {
        if c != found {
            return Err(usage(format!(
                "{} holds {} data, not {}",
                path.display(),
                found.name(),
                c.name()
            )));
        }
    }
    Ok((found, data))
}

/// Combines the overlaid file and flag values with the defaults of the case.
pub fn resolve(
    file: &TrainFile,
    arch: ArchArg,
    case: CaseStudy,
    dataset: &Path,
    data: &Dataset,
    mapping: Option<CementMapping>,
) -> Result<RunConfig> {
    let p = data.input_columns.len();
    let q = data.output_columns.len();
    let seed = file.seed.unwrap_or(0);
    let network = match arch {
        ArchArg::Kan => {
            let (hidden, degree, grid) = default_kan(case);
            NetworkConfig::Kan(KanConfig::new(
                p,
                file.hidden.clone().unwrap_or(hidden),
                q,
                file.degree.unwrap_or(degree),
                file.grid.unwrap_or(grid),
            ))
        }
        ArchArg::Mlp => NetworkConfig::Mlp(MlpConfig::new(
            p,
            file.hidden.clone().unwrap_or_else(|| DEFAULT_MLP_HIDDEN.to_vec()),
            q,
            file.activation.unwrap_or(ActivationArg::Mish).into(),
        )),
    };
    network.validate().map_err(|e| usage(e.to_string()))?;
    let defaults = SchedulerConfig::default();
    let train = TrainConfig {
        epochs: file.epochs.unwrap_or_else(|| default_epochs(case)),
        batch_size: file.batch_size.unwrap_or(192),
        initial_lr: file.initial_lr.unwrap_or(0.01),
        scheduler: SchedulerConfig {
            patience: file.patience.unwrap_or(defaults.patience),
            factor: file.factor.unwrap_or_else(|| default_factor(case)),
            min_lr: file.min_lr.unwrap_or(defaults.min_lr),
        },
        seed,
        shuffle: true,
    };
    train.validate().map_err(|e| usage(e.to_string()))?;
    let split = match file.split {
        Some(s) => SplitPlan::counts(seed, s.train, s.val, s.test),
        None => default_split(case, data.len(), seed).map_err(|e| usage(e.to_string()))?,
    };
    if split.total() != data.len() {
        return Err(usage(format!(
            "split {}/{}/{} covers {} rows, the dataset has {}",
            split.train,
            split.val,
            split.test,
            split.total(),
            data.len()
        )));
    }
    if split.train == 0 || split.val == 0 || split.test == 0 {
        return Err(usage("every partition of the split needs at least one row"));
    }
    let threshold = file.threshold.unwrap_or(DEFAULT_THRESHOLD);
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(usage(format!("threshold {threshold} must be positive")));
    }
    Ok(RunConfig {
        arch,
        case,
        dataset: dataset.to_path_buf(),
        dataset_sha256: data.sha256(),
        network,
        train,
        split,
        threshold,
        cement_mapping: mapping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 1.0, 2.0, 3.0, 4.0]).collect();
        Dataset::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["y".into(), "z".into()],
            &rows,
        )
        .unwrap()
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = TrainFile {
            epochs: Some(7),
            degree: Some(3),
            seed: Some(5),
            ..Default::default()
        };
        let flags = TrainFile {
            epochs: Some(2),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        let rc = resolve(&merged, ArchArg::Kan, CaseStudy::MechMix, Path::new("x.csv"), &toy(), None).unwrap();
        assert_eq!(rc.train.epochs, 2);
        assert_eq!(rc.train.seed, 5);
        assert_eq!(rc.train.scheduler.factor, 0.2);
        match rc.network {
            NetworkConfig::Kan(k) => {
                assert_eq!(k.degree, 3);
                assert_eq!(k.grid_size, 15);
                assert_eq!(k.hidden, vec![24; 4]);
            }
            _ => panic!("expected a KAN"),
        }
        assert_eq!(rc.split.total(), 40);
    }

    #[test]
    fn split_must_cover_the_dataset() {
        let file = TrainFile {
            split: Some("10,10,10".parse().unwrap()),
            ..Default::default()
        };
        let e = resolve(&file, ArchArg::Mlp, CaseStudy::MechMix, Path::new("x.csv"), &toy(), None).unwrap_err();
        assert_eq!(crate::exit_code(&e), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"epoch": 3}"#).unwrap();
        assert!(TrainFile::load(&p).is_err());
        std::fs::write(&p, r#"{"epochs": 3, "split": {"train": 1, "val": 1, "test": 1}}"#).unwrap();
        assert_eq!(TrainFile::load(&p).unwrap().epochs, Some(3));
    }

    #[test]
    fn split_sizes_parse() {
        assert_eq!(
            "3, 2,1".parse::<SplitSizes>().unwrap(),
            SplitSizes {
                train: 3,
                val: 2,
                test: 1
            }
        );
        assert!("3,2".parse::<SplitSizes>().is_err());
    }
}
