use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use geokan::data::{generate_dataset, GenerateOptions, Generated, MAX_EXPONENT};
use geokan::CaseStudy;

use crate::{create_dir, load_thermo, usage};

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// mech_mix, binary_ss or ternary_ss.
    #[arg(long)]
    pub case: String,
    /// Generate 2^m rows.
    #[arg(long)]
    pub m: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shift the Sobol points by a random digit pattern drawn from the seed.
    #[arg(long)]
    pub scramble: bool,
    /// Thermodynamic data CSV (defaults to $GEOKAN_THERMO_DATA, then the built-in table).
    #[arg(long)]
    pub thermo_data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &GenerateArgs, jobs: usize) -> Result<Generated> {
    let case = CaseStudy::parse(&args.case).map_err(|e| usage(e.to_string()))?;
    if case.input_ranges().is_none() {
        return Err(usage(format!("{} data is ingested from its CSV, not generated", case.name())));
    }
    if args.m > MAX_EXPONENT {
        return Err(usage(format!("--m {} exceeds the maximum of {MAX_EXPONENT}", args.m)));
    }
    let data = load_thermo(args.thermo_data.as_deref())?;
    create_dir(&args.out)?;
    let opts = GenerateOptions {
        seed: args.seed,
        scramble: args.scramble,
        jobs,
        ..GenerateOptions::new(case, args.m)
    };
    let g = generate_dataset(&opts, &data, &args.out)?;
    println!(
        "{}: {} rows ({} excluded) -> {}",
        case.name(),
        g.manifest.rows,
        g.manifest.excluded,
        g.csv_path.display()
    );
    println!("sha256 {}", g.manifest.dataset_sha256);
    Ok(g)
}
