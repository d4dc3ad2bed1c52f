use std::path::PathBuf;
use std::time::Instant;

use anyhow::{ensure, Result};
use clap::Args;
use geokan::data::{recipes_for, GenerateOptions, MAX_EXPONENT};
use geokan::metrics::improvement;
use geokan::thermo::batch_equilibrate;
use geokan::{CaseStudy, Checkpoint, Recipe, Tensor, ThermoData};
use serde::{Deserialize, Serialize};

use crate::{load_thermo, usage, write_file};

/// Rows scored once before the surrogate timing starts.
const WARM_UP_ROWS: usize = 192;

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// mech_mix, binary_ss or ternary_ss.
    #[arg(long)]
    pub case: String,
    /// Number of equilibrium calculations.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Seed of the scrambled Sobol inputs.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub thermo_data: Option<PathBuf>,
    /// Write the timings as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub case: CaseStudy,
    pub n: usize,
    pub oracle_ms: f64,
    pub surrogate_ms: f64,
    /// `100 (oracle - surrogate) / oracle`
    pub improvement_percent: f64,
    /// `oracle / surrogate`
    pub speedup: f64,
    /// Recipes on which the oracle returned an error.
    pub oracle_failures: usize,
}

impl BenchResult {
    pub fn table(&self) -> String {
        format!(
            "{:<12} {:>14} {:>16}\n{:<12} {:>14.0} {:>16}\n{:<12} {:>14.0} {:>16.2}\n",
            "method",
            format!("ms / {}", self.n),
            "improvement %",
            "oracle",
            self.oracle_ms,
            "",
            "surrogate",
            self.surrogate_ms,
            self.improvement_percent
        )
    }
}

/// Scrambled Sobol recipes of a case, away from the unscrambled points used
/// for training data.
pub fn bench_recipes(case: CaseStudy, n: usize, seed: u64) -> Result<Vec<Recipe>> {
    let opts = GenerateOptions {
        seed,
        scramble: true,
        ..GenerateOptions::new(case, MAX_EXPONENT)
    };
    Ok(recipes_for(&opts, 0, n)?)
}

/// Times the oracle and the surrogate on the same `inputs`, one row per
/// recipe in the case's input column order.
pub fn bench(
    ckpt: &Checkpoint,
    case: CaseStudy,
    inputs: &Tensor,
    data: &ThermoData,
    jobs: usize,
) -> Result<BenchResult> {
    let n = inputs.rows();
    ensure!(n > 0, "nothing to benchmark");
    let model = case.model().ok_or_else(|| usage(format!("{} has no oracle", case.name())))?;
    let recipes: Vec<Recipe> = (0..n)
        .map(|i| case.recipe(inputs.row(i)))
        .collect::<Result<_, _>>()?;
    for (i, r) in recipes.iter().enumerate() {
        assert_eq!(case.inputs_of(r), inputs.row(i), "oracle and surrogate inputs differ at row {i}");
    }

    let oracle = batch_equilibrate(&recipes, &model, data, jobs);
    let oracle_failures = oracle.states.iter().filter(|s| s.is_err()).count();

    let warm = inputs.select_rows(&(0..n.min(WARM_UP_ROWS)).collect::<Vec<_>>());
    ckpt.predict_physical(&warm)?;
    let start = Instant::now();
    let pred = ckpt.predict_physical(inputs)?;
    let surrogate_s = start.elapsed().as_secs_f64();
    ensure!(pred.rows() == n, "surrogate returned {} rows for {n} inputs", pred.rows());

    let oracle_ms = oracle.seconds * 1e3;
    let surrogate_ms = surrogate_s * 1e3;
    Ok(BenchResult {
        case,
        n,
        oracle_ms,
        surrogate_ms,
        improvement_percent: improvement(oracle_ms, surrogate_ms),
        speedup: oracle_ms / surrogate_ms,
        oracle_failures,
    })
}

pub fn run(args: &BenchArgs, jobs: usize) -> Result<BenchResult> {
    if !args.checkpoint.is_file() {
        return Err(usage(format!("checkpoint {} does not exist", args.checkpoint.display())));
    }
    let case = CaseStudy::parse(&args.case).map_err(|e| usage(e.to_string()))?;
    if case.model().is_none() {
        return Err(usage(format!("{} has no oracle to time", case.name())));
    }
    if args.n == 0 || args.n > 1 << MAX_EXPONENT {
        return Err(usage(format!("--n must lie in 1..={}", 1u64 << MAX_EXPONENT)));
    }
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(|e| usage(format!("{}: {e}", args.checkpoint.display())))?;
    let width = case.input_columns().len();
    if ckpt.network.input_dim() != width {
        return Err(usage(format!(
            "the checkpoint takes {} inputs, {} has {width}",
            ckpt.network.input_dim(),
            case.name()
        )));
    }
    let data = load_thermo(args.thermo_data.as_deref())?;
    let recipes = bench_recipes(case, args.n, args.seed)?;
    let flat: Vec<f64> = recipes.iter().flat_map(|r| case.inputs_of(r)).collect();
    let inputs = Tensor::new(vec![args.n, width], flat)?;
    let result = bench(&ckpt, case, &inputs, &data, jobs)?;
    print!("{}", result.table());
    println!("speedup {:.2}x", result.speedup);
    if result.oracle_failures > 0 {
        log::warn!("the oracle failed on {} of {} recipes", result.oracle_failures, result.n);
    }
    if let Some(p) = &args.out {
        write_file(p, &serde_json::to_string_pretty(&result)?)?;
    }
    Ok(result)
}
