use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use geokan::train::{prepare, random_search, Arch, SearchSpace, Trial};
use geokan::{CaseStudy, NetworkConfig, TrainConfig};

use crate::config::{default_split, load_dataset, ActivationArg, ArchArg, SplitSizes, TrainFile};
use crate::{create_dir, usage, write_file};

pub const TRIALS_FILE: &str = "trials.csv";
pub const BEST_FILE: &str = "best_config.json";

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// JSON search space.
    #[arg(long)]
    pub space: PathBuf,
    /// Number of trials.
    #[arg(long)]
    pub budget: usize,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Partition sizes `TRAIN,VAL,TEST`; the test rows are never used.
    #[arg(long)]
    pub split: Option<SplitSizes>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub trials: Vec<Trial>,
    pub best: TrainFile,
}

/// Ranked trials: rank, trial index, architecture, sizes and validation loss.
pub fn trials_csv(trials: &[Trial]) -> String {
    let mut s = String::from("rank,trial,network,batch_size,param_count,val_loss,seconds\n");
    for (rank, t) in trials.iter().enumerate() {
        writeln!(
            s,
            "{},{},{},{},{},{:?},{:.3}",
            rank + 1,
            t.index,
            t.network.describe(),
            t.batch_size,
            t.param_count,
            t.val_loss,
            t.seconds
        )
        .expect("write to string");
    }
    s
}

/// A training config file reproducing a trial's architecture.
pub fn trial_config(t: &Trial, case: CaseStudy, space: &SearchSpace) -> TrainFile {
    let mut f = TrainFile {
        case: Some(case.name().to_string()),
        batch_size: Some(t.batch_size),
        ..Default::default()
    };
    match &t.network {
        NetworkConfig::Kan(k) => {
            f.arch = Some(ArchArg::Kan);
            f.hidden = Some(k.hidden.clone());
            f.degree = Some(k.degree);
            f.grid = Some(k.grid_size);
        }
        NetworkConfig::Mlp(m) => {
            f.arch = Some(ArchArg::Mlp);
            f.hidden = Some(m.hidden.clone());
            f.activation = Some(match space.activation {
                geokan::nn::Activation::Silu => ActivationArg::Silu,
                _ => ActivationArg::Mish,
            });
        }
    }
    f
}

pub fn run(args: &SearchArgs, jobs: usize) -> Result<SearchOutcome> {
    let text = std::fs::read_to_string(&args.space)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.space.display())))?;
    let space: SearchSpace = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", args.space.display())))?;
    space.validate().map_err(|e| usage(e.to_string()))?;
    if args.budget == 0 {
        return Err(usage("--budget must be at least 1"));
    }
    let (case, data) = load_dataset(&args.dataset, None, None)?;
    if space.input_dim != data.input_columns.len() || space.output_dim != data.output_columns.len() {
        return Err(usage(format!(
            "search space is {}->{}, the dataset is {}->{}",
            space.input_dim,
            space.output_dim,
            data.input_columns.len(),
            data.output_columns.len()
        )));
    }
    if space.arch == Arch::Mlp && space.activation == geokan::nn::Activation::Identity {
        return Err(usage("the MLP activation must be mish or silu"));
    }
    let plan = match args.split {
        Some(s) => geokan::SplitPlan::counts(args.seed, s.train, s.val, s.test),
        None => default_split(case, data.len(), args.seed)?,
    };
    let prepared = prepare(&data, &plan).map_err(|e| usage(e.to_string()))?;
    let base = TrainConfig {
        seed: args.seed,
        ..TrainConfig::default()
    };
    let trials = random_search(&space, args.budget, &prepared.data, &base, args.seed, jobs)?;
    let best = trial_config(&trials[0], case, &space);

    create_dir(&args.out)?;
    write_file(&args.out.join(TRIALS_FILE), &trials_csv(&trials))?;
    write_file(&args.out.join(BEST_FILE), &serde_json::to_string_pretty(&best)?)?;
    let t = &trials[0];
    println!(
        "best of {}: trial {} {} ({} parameters), val loss {:.4e}",
        trials.len(),
        t.index,
        t.network.describe(),
        t.param_count,
        t.val_loss
    );
    Ok(SearchOutcome { trials, best })
}
