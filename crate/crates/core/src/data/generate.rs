use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, push_row, CaseStudy, DataError, Dataset, SobolSampler};
use crate::thermo::{batch_equilibrate, EquilibriumState, Recipe, ThermoData};

/// Largest accepted size exponent.
pub const MAX_EXPONENT: u32 = 24;
const CHUNK: usize = 4096;
const BALANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub case: CaseStudy,
    /// The dataset has `2^m` Sobol points (before exclusions).
    pub m: u32,
    pub seed: u64,
    /// Apply a digital shift seeded by `seed`; otherwise the plain sequence is used.
    pub scramble: bool,
    pub jobs: usize,
}

impl GenerateOptions {
    pub fn new(case: CaseStudy, m: u32) -> Self {
        Self {
            case,
            m,
            seed: 0,
            scramble: false,
            jobs: 1,
        }
    }

    pub fn rows(&self) -> usize {
        1usize << self.m
    }

    fn stem(&self) -> String {
        format!("{}_m{}", self.case.name(), self.m)
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.case.input_ranges().is_none() {
            return Err(DataError::Invalid(format!(
                "{} data cannot be generated, it must be ingested",
                self.case.name()
            )));
        }
        if self.m > MAX_EXPONENT {
            return Err(DataError::Invalid(format!("m = {} exceeds {MAX_EXPONENT}", self.m)));
        }
        Ok(())
    }
}

/// Provenance record written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub options: GenerateOptions,
    pub model: String,
    pub input_columns: Vec<String>,
    pub output_columns: Vec<String>,
    pub first_sobol_index: u64,
    pub requested_rows: usize,
    pub rows: usize,
    pub excluded: usize,
    /// Zero-based positions in the Sobol order of rows left out because the
    /// oracle failed or violated a balance.
    pub excluded_rows: Vec<usize>,
    pub thermo_data_sha256: String,
    pub dataset_sha256: String,
    pub dataset_file: String,
}

/// A finished generation run.
#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    pub manifest: Manifest,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Progress {
    options: GenerateOptions,
    thermo_data_sha256: String,
    done: usize,
    excluded_rows: Vec<usize>,
}

fn sampler(opts: &GenerateOptions) -> Result<SobolSampler, DataError> {
    let dim = opts.case.input_columns().len();
    SobolSampler::with_scramble(dim, opts.scramble.then_some(opts.seed))
}

/// Recipes of rows `start..end` in Sobol order (row `i` is Sobol index `i + 1`).
pub fn recipes_for(opts: &GenerateOptions, start: usize, end: usize) -> Result<Vec<Recipe>, DataError> {
    opts.validate()?;
    let ranges = opts.case.input_ranges().expect("validated");
    let mut s = sampler(opts)?;
    s.seek(start as u64 + 1);
    (start..end)
        .map(|_| {
            let u = s.next_point();
            let x: Vec<f64> = u.iter().zip(&ranges).map(|(&u, r)| r.scale(u)).collect();
            opts.case.recipe(&x)
        })
        .collect()
}

fn accepted(st: &EquilibriumState) -> bool {
    st.mass_balance_residual() <= BALANCE_TOL && st.charge_balance_residual() <= BALANCE_TOL
}

/// Equilibrates rows `start..end`, returning the CSV rows of accepted states
/// and the positions of excluded ones.
fn compute_chunk(
    opts: &GenerateOptions,
    data: &ThermoData,
    start: usize,
    end: usize,
) -> Result<(Vec<Vec<f64>>, Vec<usize>), DataError> {
    let recipes = recipes_for(opts, start, end)?;
    let model = opts.case.model().expect("validated");
    let batch = batch_equilibrate(&recipes, &model, data, opts.jobs);
    let mut rows = Vec::with_capacity(recipes.len());
    let mut excluded = Vec::new();
    for (k, (r, st)) in recipes.iter().zip(batch.states).enumerate() {
        match st {
            Ok(st) if accepted(&st) => {
                let mut row = opts.case.inputs_of(r);
                row.extend(opts.case.outputs_of(&st));
                rows.push(row);
            }
            Ok(st) => {
                log::warn!(
                    "row {} excluded: balance residuals {:.3e}/{:.3e}",
                    start + k,
                    st.mass_balance_residual(),
                    st.charge_balance_residual()
                );
                excluded.push(start + k);
            }
            Err(e) => {
                log::warn!("row {} excluded: {e}", start + k);
                excluded.push(start + k);
            }
        }
    }
    Ok((rows, excluded))
}

fn columns(case: CaseStudy) -> (Vec<String>, Vec<String>) {
    (
        case.input_columns().iter().map(|s| s.to_string()).collect(),
        case.output_columns().iter().map(|s| s.to_string()).collect(),
    )
}

/// In-memory generation of the first `n` rows, with excluded row positions.
pub fn oracle_dataset(
    opts: &GenerateOptions,
    data: &ThermoData,
    n: usize,
) -> Result<(Dataset, Vec<usize>), DataError> {
    opts.validate()?;
    let (rows, excluded) = compute_chunk(opts, data, 0, n)?;
    let (i, o) = columns(opts.case);
    Ok((Dataset::from_rows(i, o, &rows)?, excluded))
}

/// Generates `2^m` rows for `opts.case`, writing `<case>_m<m>.csv` and
/// `<case>_m<m>.manifest.json` into `out_dir`.
///
/// Work is committed in chunks to `<stem>.partial.csv` with a progress
/// file, so an interrupted run picks up where it stopped when called again
/// with the same options and thermodynamic data. The output does not
/// depend on `jobs` or on interruptions.
pub fn generate_dataset(opts: &GenerateOptions, data: &ThermoData, out_dir: &Path) -> Result<Generated, DataError> {
    opts.validate()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let stem = opts.stem();
    let partial_path = out_dir.join(format!("{stem}.partial.csv"));
    let progress_path = out_dir.join(format!("{stem}.progress.json"));
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let manifest_path = out_dir.join(format!("{stem}.manifest.json"));
    let n = opts.rows();
    let (input_columns, output_columns) = columns(opts.case);
    let header = input_columns.iter().chain(&output_columns).cloned().collect::<Vec<_>>().join(",");

    let mut progress = Progress {
        options: opts.clone(),
        thermo_data_sha256: data.sha256().to_string(),
        done: 0,
        excluded_rows: Vec::new(),
    };
    let mut body = String::new();
    if let Some(prev) = resume(&progress_path, &partial_path, &progress)? {
        log::info!("resuming {stem} at row {}", prev.0.done);
        progress = prev.0;
        body = prev.1;
    } else {
        std::fs::write(&partial_path, "").map_err(io_err(&partial_path))?;
    }

    while progress.done < n {
        let end = (progress.done + CHUNK).min(n);
        let (rows, excluded) = compute_chunk(opts, data, progress.done, end)?;
        let mut text = String::new();
        for r in &rows {
            push_row(&mut text, r.iter());
        }
        let mut f = std::fs::OpenOptions::new()
            .append(true)
            .open(&partial_path)
            .map_err(io_err(&partial_path))?;
        f.write_all(text.as_bytes()).map_err(io_err(&partial_path))?;
        f.sync_all().map_err(io_err(&partial_path))?;
        body.push_str(&text);
        progress.done = end;
        progress.excluded_rows.extend(excluded);
        write_atomic(&progress_path, &serde_json::to_string(&progress).expect("serialize progress"))?;
        log::debug!("{stem}: {end}/{n} rows");
    }

    let text = format!("{header}\n{body}");
    let dataset = if body.is_empty() {
        Dataset::from_rows(input_columns.clone(), output_columns.clone(), &[])?
    } else {
        Dataset::parse_csv(&text, input_columns.len())?
    };
    write_atomic(&csv_path, &text)?;
    if !progress.excluded_rows.is_empty() {
        log::warn!("{stem}: {} of {n} rows excluded", progress.excluded_rows.len());
    }
    let manifest = Manifest {
        options: opts.clone(),
        model: opts.case.model().expect("validated").variant.name().to_string(),
        input_columns,
        output_columns,
        first_sobol_index: 1,
        requested_rows: n,
        rows: dataset.len(),
        excluded: progress.excluded_rows.len(),
        excluded_rows: progress.excluded_rows,
        thermo_data_sha256: data.sha256().to_string(),
        dataset_sha256: dataset.sha256(),
        dataset_file: csv_path.file_name().expect("file name").to_string_lossy().into_owned(),
    };
    write_atomic(
        &manifest_path,
        &serde_json::to_string_pretty(&manifest).expect("serialize manifest"),
    )?;
    let _ = std::fs::remove_file(&partial_path);
    let _ = std::fs::remove_file(&progress_path);
    Ok(Generated {
        dataset,
        manifest,
        csv_path,
        manifest_path,
    })
}

/// Loads an earlier interrupted run if it was made with the same options
/// and data. Rows appended after the last progress record are dropped.
fn resume(progress_path: &Path, partial_path: &Path, fresh: &Progress) -> Result<Option<(Progress, String)>, DataError> {
    let (Ok(p), Ok(partial)) = (
        std::fs::read_to_string(progress_path),
        std::fs::read_to_string(partial_path),
    ) else {
        return Ok(None);
    };
    let Ok(prev) = serde_json::from_str::<Progress>(&p) else {
        return Ok(None);
    };
    if prev.options != fresh.options || prev.thermo_data_sha256 != fresh.thermo_data_sha256 {
        return Ok(None);
    }
    let keep = prev.done - prev.excluded_rows.len();
    let lines: Vec<&str> = partial.lines().take(keep).collect();
    if lines.len() < keep {
        return Ok(None);
    }
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    std::fs::write(partial_path, &body).map_err(io_err(partial_path))?;
    Ok(Some((prev, body)))
}

fn write_atomic(path: &Path, text: &str) -> Result<(), DataError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}
