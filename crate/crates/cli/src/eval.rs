use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use geokan::metrics::DEFAULT_THRESHOLD;
use geokan::train::evaluate;
use geokan::{CaseStudy, Checkpoint, ErrorReport};

use crate::config::load_dataset;
use crate::train::print_report;
use crate::{create_dir, usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    /// Every row of the dataset.
    All,
}

impl SplitArg {
    fn name(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Val => "val",
            SplitArg::Test => "test",
            SplitArg::All => "all",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Partition to score, using the split stored in the checkpoint.
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Relative error above which a prediction counts as an exceedance.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Directory for the report files; the report is only printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report file name stem.
    #[arg(long, default_value = "eval")]
    pub stem: String,
}

pub fn run(args: &EvalArgs) -> Result<ErrorReport> {
    if !args.checkpoint.is_file() {
        return Err(usage(format!("checkpoint {} does not exist", args.checkpoint.display())));
    }
    if !(args.threshold > 0.0 && args.threshold.is_finite()) {
        return Err(usage(format!("threshold {} must be positive", args.threshold)));
    }
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(|e| usage(format!("{}: {e}", args.checkpoint.display())))?;
    let case = ckpt
        .metadata
        .case
        .as_deref()
        .map(CaseStudy::parse)
        .transpose()
        .map_err(|e| usage(e.to_string()))?;
    let (_, data) = load_dataset(&args.dataset, case, None)?;
    let rows = match args.split {
        SplitArg::All => data,
        part => {
            let plan = ckpt
                .metadata
                .split
                .ok_or_else(|| usage("the checkpoint records no split; use --split all"))?;
            let split = plan.split(data.len()).map_err(|e| {
                usage(format!("{e}; the dataset does not match the one the checkpoint was trained on"))
            })?;
            let idx = match part {
                SplitArg::Train => split.train,
                SplitArg::Val => split.val,
                _ => split.test,
            };
            data.select(&idx)
        }
    };
    let report = evaluate(&ckpt, &rows, args.threshold)?;
    println!("{} rows of the {} split", report.n, args.split.name());
    print_report(&report);
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        report.write(dir, &args.stem)?;
    }
    Ok(report)
}
