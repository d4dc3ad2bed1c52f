use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use geokan::data::CementMapping;
use geokan::train::{run_experiment, ExperimentResult};
use geokan::CaseStudy;

use crate::config::{load_dataset, resolve, ActivationArg, ArchArg, RunConfig, SplitSizes, TrainFile};
use crate::{create_dir, usage, write_file};

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const TEST_FILE: &str = "test.csv";
pub const REPORT_STEM: &str = "test_report";

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    /// Dataset CSV, either generated by this tool or the cement benchmark file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Case study of the dataset; inferred from the header when omitted.
    #[arg(long)]
    pub case: Option<String>,
    /// JSON column mapping for the cement benchmark file.
    #[arg(long)]
    pub cement_mapping: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch")]
    pub batch_size: Option<usize>,
    #[arg(long = "lr")]
    pub initial_lr: Option<f64>,
    /// Learning-rate multiplier applied on a plateau.
    #[arg(long)]
    pub factor: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden widths, e.g. `24,24,24`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Number of hidden layers; combine with --neurons instead of --hidden.
    #[arg(long, requires = "neurons", conflicts_with = "hidden")]
    pub layers: Option<usize>,
    #[arg(long, requires = "layers")]
    pub neurons: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    /// Partition sizes `TRAIN,VAL,TEST`.
    #[arg(long)]
    pub split: Option<SplitSizes>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

impl TrainArgs {
    fn as_file(&self) -> TrainFile {
        let hidden = self
            .hidden
            .clone()
            .or_else(|| self.layers.zip(self.neurons).map(|(l, n)| vec![n; l]));
        TrainFile {
            arch: self.arch,
            case: self.case.clone(),
            hidden,
            degree: self.degree,
            grid: self.grid,
            activation: self.activation,
            epochs: self.epochs,
            batch_size: self.batch_size,
            initial_lr: self.initial_lr,
            factor: self.factor,
            patience: self.patience,
            min_lr: None,
            seed: self.seed,
            split: self.split,
            threshold: self.threshold,
            cement_mapping: self.cement_mapping.clone(),
        }
    }
}

/// A finished training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub config: RunConfig,
    pub result: ExperimentResult,
    pub dir: PathBuf,
}

pub fn run(args: &TrainArgs) -> Result<TrainOutcome> {
    let file = match &args.config {
        Some(p) => TrainFile::load(p)?,
        None => TrainFile::default(),
    };
    let merged = file.overlay(args.as_file());
    let arch = merged.arch.ok_or_else(|| usage("--arch is required (kan or mlp) unless the config file sets it"))?;
    let case = merged
        .case
        .as_deref()
        .map(CaseStudy::parse)
        .transpose()
        .map_err(|e| usage(e.to_string()))?;
    let mapping = merged
        .cement_mapping
        .as_deref()
        .map(CementMapping::from_json_path)
        .transpose()
        .map_err(|e| usage(e.to_string()))?;
    let (case, data) = load_dataset(&args.dataset, case, mapping.as_ref())?;
    let rc = resolve(&merged, arch, case, &args.dataset, &data, mapping)?;

    create_dir(&args.out)?;
    let dir = args.out.clone();
    write_file(&dir.join(CONFIG_FILE), &serde_json::to_string_pretty(&rc)?)?;
    log::info!(
        "{} on {} ({} rows): {} parameters",
        rc.network.describe(),
        case.name(),
        data.len(),
        rc.network.param_count()
    );
    println!("{}: param_count {}", rc.network.describe(), rc.network.param_count());

    let mut result = run_experiment(&data, &rc.network, &rc.train, &rc.split, rc.threshold)?;
    result.checkpoint.metadata.case = Some(case.name().to_string());
    result
        .checkpoint
        .save(dir.join(CHECKPOINT_FILE))
        .context("saving the checkpoint")?;
    write_file(&dir.join(EPOCHS_FILE), &result.report.epochs_csv())?;
    result.prepared.test.write_csv(dir.join(TEST_FILE))?;
    result.test_report.write(&dir, REPORT_STEM)?;

    let r = &result.report;
    println!(
        "best epoch {} of {}, val loss {:.4e}, {:.1} s",
        r.best_epoch,
        r.final_epoch(),
        r.best_val_loss,
        r.seconds
    );
    print_report(&result.test_report);
    Ok(TrainOutcome { config: rc, result, dir })
}

/// Per-output RMSE and RRMSE table on stdout.
pub fn print_report(report: &geokan::ErrorReport) {
    println!("{:<16} {:>12} {:>12} {:>12} {:>8}", "output", "RMSE", "RRMSE", "median|e|", "> thr");
    for o in &report.outputs {
        println!(
            "{:<16} {:>12.4e} {:>12.4e} {:>12.4e} {:>8}",
            o.name, o.rmse, o.rrmse, o.relative_error.quantiles.median, o.relative_error.exceedance
        );
    }
    println!(
        "{:<16} {:>12.4e} {:>12.4e} {:>12} {:>8}",
        "mean", report.mean_rmse, report.mean_rrmse, "", report.total_exceedance
    );
}
