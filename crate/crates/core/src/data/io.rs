use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cases::{CEMENT_INPUTS, CEMENT_OUTPUTS};
use super::{io_err, parse_numeric_rows, DataError, Dataset};

/// Which source columns of the cement benchmark file feed the 3 inputs and
/// 18 outputs, listed in canonical order (`CaO, SiO2, H2O, pH, ..., Gel_water`).
///
/// Loadable from JSON so a differently named file can be ingested without
/// code changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CementMapping {
    pub source_columns: Vec<String>,
    /// When the named columns are absent, take the last 21 columns of the
    /// file in order.
    #[serde(default = "yes")]
    pub positional_fallback: bool,
}

fn yes() -> bool {
    true
}

impl Default for CementMapping {
    fn default() -> Self {
        Self {
            source_columns: CEMENT_INPUTS
                .iter()
                .chain(CEMENT_OUTPUTS.iter())
                .map(|s| s.to_string())
                .collect(),
            positional_fallback: true,
        }
    }
}

impl CementMapping {
    pub const WIDTH: usize = CEMENT_INPUTS.len() + CEMENT_OUTPUTS.len();

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| DataError::Csv {
            path: path.to_path_buf(),
            message: format!("invalid column mapping: {e}"),
        })?;
        if m.source_columns.len() != Self::WIDTH {
            return Err(DataError::Invalid(format!(
                "column mapping lists {} columns, expected {}",
                m.source_columns.len(),
                Self::WIDTH
            )));
        }
        Ok(m)
    }

    /// Indices of the mapped columns within `header`.
    fn resolve(&self, header: &[String]) -> Result<Vec<usize>, DataError> {
        let by_name: Result<Vec<usize>, String> = self
            .source_columns
            .iter()
            .map(|name| header.iter().position(|h| h == name).ok_or_else(|| name.clone()))
            .collect();
        match by_name {
            Ok(idx) => Ok(idx),
            Err(_) if self.positional_fallback && header.len() >= Self::WIDTH => {
                Ok((header.len() - Self::WIDTH..header.len()).collect())
            }
            Err(missing) => Err(DataError::MissingColumn(missing)),
        }
    }
}

/// Reads the published cement benchmark CSV into a dataset with the
/// canonical column names.
pub fn ingest_cement_csv(path: impl AsRef<Path>, mapping: &CementMapping) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let columns = mapping.resolve(&header)?;
    let rows = parse_numeric_rows(&mut rdr, &header, &columns)?;
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let canon = CementMapping::default().source_columns;
    let (inputs, outputs) = canon.split_at(CEMENT_INPUTS.len());
    log::info!("ingested {} cement rows from {}", rows.len(), path.display());
    Dataset::from_rows(inputs.to_vec(), outputs.to_vec(), &rows)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn canonical_header() -> String {
        CementMapping::default().source_columns.join(",")
    }

    fn row(seed: f64) -> String {
        (0..21).map(|k| format!("{}", seed + k as f64)).collect::<Vec<_>>().join(",")
    }

    #[test]
    fn by_name_in_any_order() {
        let mut cols = CementMapping::default().source_columns;
        cols.reverse();
        let vals: Vec<String> = (0..21).rev().map(|k| k.to_string()).collect();
        let f = write(&format!("{}\n{}\n", cols.join(","), vals.join(",")));
        let d = ingest_cement_csv(f.path(), &CementMapping::default()).unwrap();
        assert_eq!(d.x.row(0), &[0.0, 1.0, 2.0]);
        assert_eq!(d.y.row(0)[17], 20.0);
        assert_eq!(d.output_columns[15], "H2O(ss)");
    }

    #[test]
    fn positional_fallback_uses_last_columns() {
        let header: Vec<String> = (0..22).map(|k| format!("c{k}")).collect();
        let f = write(&format!("{}\n-1,{}\n-1,{}\n", header.join(","), row(0.0), row(100.0)));
        let d = ingest_cement_csv(f.path(), &CementMapping::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.x.row(1)[0], 100.0);
        let strict = CementMapping {
            positional_fallback: false,
            ..CementMapping::default()
        };
        assert!(matches!(
            ingest_cement_csv(f.path(), &strict),
            Err(DataError::MissingColumn(c)) if c == "CaO"
        ));
    }

    #[test]
    fn header_only_is_empty() {
        let f = write(&format!("{}\n", canonical_header()));
        assert!(matches!(ingest_cement_csv(f.path(), &CementMapping::default()), Err(DataError::Empty)));
    }

    #[test]
    fn nan_cell_is_located() {
        let mut bad: Vec<String> = (0..21).map(|k| k.to_string()).collect();
        bad[4] = "NaN".into();
        let f = write(&format!("{}\n{}\n{}\n", canonical_header(), row(0.0), bad.join(",")));
        match ingest_cement_csv(f.path(), &CementMapping::default()).unwrap_err() {
            DataError::Cell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "MassWater");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn mapping_from_json() {
        let mut m = CementMapping::default();
        m.source_columns[0] = "cao_in".into();
        let f = write(&serde_json::to_string(&m).unwrap());
        assert_eq!(CementMapping::from_json_path(f.path()).unwrap(), m);
        let f = write(r#"{"source_columns": ["a"]}"#);
        assert!(CementMapping::from_json_path(f.path()).is_err());
    }
}
