//! Datasets: case-study schemas, Sobol sampling, generation with the
//! equilibrium oracle, CSV interchange, preprocessing and splitting.

mod cases;
mod generate;
mod io;
mod preprocess;
mod sobol;
mod split;

pub use cases::{CaseStudy, InputRange, CEMENT_INPUTS, CEMENT_OUTPUTS};
pub use generate::{generate_dataset, oracle_dataset, recipes_for, GenerateOptions, Generated, Manifest, MAX_EXPONENT};
pub use io::{ingest_cement_csv, CementMapping};
pub use preprocess::{default_log_flags, ColumnScaler, Preprocessor, LOG_EPSILON};
pub use sobol::{SobolSampler, MAX_SOBOL_DIM};
pub use split::{Split, SplitPlan};

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::thermo::ThermoError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("row {row}, column {column}: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("dataset has no rows")]
    Empty,
    #[error("Sobol dimension {0} exceeds the direction-number table (max {MAX_SOBOL_DIM})")]
    SobolDimension(usize),
    #[error("split plan needs {needed} rows, dataset has {available}")]
    SplitSize { needed: usize, available: usize },
    #[error("preprocessing: {0}")]
    Preprocess(String),
    #[error("unknown case study {0:?}")]
    UnknownCase(String),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Inputs and outputs of a tabular dataset, row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub input_columns: Vec<String>,
    pub output_columns: Vec<String>,
    /// `[rows, inputs]`
    pub x: Tensor,
    /// `[rows, outputs]`
    pub y: Tensor,
}

impl Dataset {
    pub fn new(
        input_columns: Vec<String>,
        output_columns: Vec<String>,
        x: Tensor,
        y: Tensor,
    ) -> Result<Self, DataError> {
        let ok = x.shape().len() == 2
            && y.shape().len() == 2
            && x.rows() == y.rows()
            && x.cols() == input_columns.len()
            && y.cols() == output_columns.len();
        if !ok {
            return Err(DataError::Invalid(format!(
                "inconsistent dataset: x {:?}, y {:?}, {} input and {} output names",
                x.shape(),
                y.shape(),
                input_columns.len(),
                output_columns.len()
            )));
        }
        Ok(Self {
            input_columns,
            output_columns,
            x,
            y,
        })
    }

    /// Builds a dataset from rows of `inputs ++ outputs`.
    pub fn from_rows(
        input_columns: Vec<String>,
        output_columns: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self, DataError> {
        let p = input_columns.len();
        let q = output_columns.len();
        let mut x = Vec::with_capacity(rows.len() * p);
        let mut y = Vec::with_capacity(rows.len() * q);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p + q {
                return Err(DataError::Invalid(format!("row {i} has {} values, expected {}", r.len(), p + q)));
            }
            x.extend_from_slice(&r[..p]);
            y.extend_from_slice(&r[p..]);
        }
        let n = rows.len();
        Self::new(
            input_columns,
            output_columns,
            Tensor::new(vec![n, p], x).expect("shape"),
            Tensor::new(vec![n, q], y).expect("shape"),
        )
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            input_columns: self.input_columns.clone(),
            output_columns: self.output_columns.clone(),
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
        }
    }

    /// CSV text: header, then one line per row with inputs before outputs.
    /// Numbers use the shortest representation that reads back exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .input_columns
            .iter()
            .chain(&self.output_columns)
            .map(String::as_str)
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for r in 0..self.len() {
            push_row(&mut out, self.x.row(r).iter().chain(self.y.row(r)));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(io_err(path))
    }

    /// Reads a dataset CSV whose first `n_inputs` columns are inputs.
    pub fn read_csv(path: impl AsRef<Path>, n_inputs: usize) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse_csv(&text, n_inputs).map_err(|e| match e {
            DataError::Csv { message, .. } => DataError::Csv {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Reads a dataset CSV whose header identifies a known case study.
    pub fn read_case_csv(path: impl AsRef<Path>) -> Result<(CaseStudy, Self), DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let header = text.lines().next().unwrap_or_default();
        let case = CaseStudy::from_header(header)
            .ok_or_else(|| DataError::Invalid(format!("{}: header matches no case study", path.display())))?;
        Ok((case, Self::parse_csv(&text, case.input_columns().len())?))
    }

    pub fn parse_csv(text: &str, n_inputs: usize) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if n_inputs > headers.len() {
            return Err(csv_err(format!("{} input columns requested, file has {}", n_inputs, headers.len())));
        }
        let rows = parse_numeric_rows(&mut rdr, &headers, &(0..headers.len()).collect::<Vec<_>>())?;
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let outputs = headers[n_inputs..].to_vec();
        let inputs = headers[..n_inputs].to_vec();
        Self::from_rows(inputs, outputs, &rows)
    }

    /// Hex SHA-256 of [`Dataset::to_csv_string`].
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }
}

fn csv_err(message: String) -> DataError {
    DataError::Csv {
        path: PathBuf::from("<csv>"),
        message,
    }
}

pub(crate) fn push_row<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    use std::fmt::Write;
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        write!(out, "{v:?}").expect("write to string");
    }
    out.push('\n');
}

/// Parses the selected columns of every record as finite numbers.
pub(crate) fn parse_numeric_rows<R: std::io::Read>(
    rdr: &mut csv::Reader<R>,
    headers: &[String],
    columns: &[usize],
) -> Result<Vec<Vec<f64>>, DataError> {
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Data rows are numbered from 1; the header is row 0.
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::Cell {
            row,
            column: "-".into(),
            message: e.to_string(),
        })?;
        let mut values = Vec::with_capacity(columns.len());
        for &c in columns {
            let cell = rec.get(c).ok_or_else(|| DataError::Cell {
                row,
                column: headers[c].clone(),
                message: "missing cell".into(),
            })?;
            let v: f64 = cell.parse().map_err(|_| DataError::Cell {
                row,
                column: headers[c].clone(),
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(DataError::Cell {
                    row,
                    column: headers[c].clone(),
                    message: format!("non-finite value {cell}"),
                });
            }
            values.push(v);
        }
        rows.push(values);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::from_rows(
            vec!["a".into(), "b".into()],
            vec!["y".into()],
            &[vec![0.1, 2.0, 3.0], vec![1e-300, 5.0, 0.30000000000000004]],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = tiny();
        let back = Dataset::parse_csv(&d.to_csv_string(), 2).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.sha256(), d.sha256());
    }

    #[test]
    fn bad_cells_are_located() {
        let err = Dataset::parse_csv("a,b,y\n1,2,3\n4,NaN,6\n", 2).unwrap_err();
        match err {
            DataError::Cell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            e => panic!("{e}"),
        }
        assert!(matches!(Dataset::parse_csv("a,b,y\n", 2), Err(DataError::Empty)));
    }

    #[test]
    fn select_rows() {
        let d = tiny().select(&[1]);
        assert_eq!(d.len(), 1);
        assert_eq!(d.y.data(), &[0.30000000000000004]);
    }
}
