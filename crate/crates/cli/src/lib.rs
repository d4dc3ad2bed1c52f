//! Command-line front end: dataset generation, training, evaluation,
//! architecture search and oracle-versus-surrogate timing.

pub mod bench;
pub mod config;
pub mod eval;
pub mod generate;
pub mod search;
pub mod train;

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Parser, Subcommand};

/// Environment variable naming the default thermodynamic data file.
pub const THERMO_DATA_ENV: &str = "GEOKAN_THERMO_DATA";

/// Marks an error caused by bad flags, files or configuration rather than
/// a failure while running. Such errors exit with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Process exit status for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "geokan", version, about = "Surrogate models of radium sulfate equilibria")]
pub struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample recipes on a Sobol sequence and equilibrate them.
    Generate(generate::GenerateArgs),
    /// Train a KAN or an MLP and write a run directory.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(eval::EvalArgs),
    /// Random architecture search.
    Search(search::SearchArgs),
    /// Time the oracle against a surrogate on the same inputs.
    Bench(bench::BenchArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs as usize;
    match cli.command {
        Command::Generate(a) => generate::run(&a, jobs).map(|_| ()),
        Command::Train(a) => train::run(&a).map(|_| ()),
        Command::Eval(a) => eval::run(&a).map(|_| ()),
        Command::Search(a) => search::run(&a, jobs).map(|_| ()),
        Command::Bench(a) => bench::run(&a, jobs).map(|_| ()),
    }
}

/// Thermodynamic data from `path`, else from the environment variable,
/// else the built-in table.
pub fn load_thermo(path: Option<&Path>) -> Result<geokan::ThermoData> {
    let from_env = std::env::var_os(THERMO_DATA_ENV).map(PathBuf::from);
    match path.map(Path::to_path_buf).or(from_env) {
        Some(p) => {
            if !p.is_file() {
                return Err(usage(format!("thermodynamic data file {} does not exist", p.display())));
            }
            geokan::ThermoData::from_path(&p).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
        None => Ok(geokan::ThermoData::default()),
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
}
