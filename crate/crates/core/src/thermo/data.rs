use std::path::Path;

use sha2::{Digest, Sha256};

use super::{kelvin, EndMember, ThermoError, R};

/// Default solubility-product table shipped with the crate.
pub const DEFAULT_THERMO_CSV: &str = include_str!("../../data/thermo_default.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
enum Quantity {
    LogKsp,
    GStandard,
}

/// Standard-state data for the sulfate end members.
///
/// Loaded from CSV with the header `end_member,T_celsius,log_Ksp` or
/// `end_member,T_celsius,G_standard_J_per_mol`. Lines starting with `#` are
/// comments. Values are interpolated linearly in temperature; a member with
/// a single row is treated as temperature independent. Gibbs energies are
/// converted to `log10 Ksp` with the aqueous reference potentials of the
/// cation and sulfate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoData {
    tables: [Vec<(f64, f64)>; 3],
    sha256: String,
}

impl Default for ThermoData {
    fn default() -> Self {
        Self::from_csv_str(DEFAULT_THERMO_CSV).expect("bundled table parses")
    }
}

impl ThermoData {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ThermoError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ThermoError::Data(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, ThermoError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| ThermoError::Data(e.to_string()))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let quantity = match cols.as_slice() {
            ["end_member", "T_celsius", "log_Ksp"] => Quantity::LogKsp,
            ["end_member", "T_celsius", "G_standard_J_per_mol"] => Quantity::GStandard,
            _ => {
                return Err(ThermoError::Data(format!(
                    "expected header end_member,T_celsius,log_Ksp|G_standard_J_per_mol, found {}",
                    cols.join(",")
                )))
            }
        };
        let mut tables: [Vec<(f64, f64)>; 3] = Default::default();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| ThermoError::Data(format!("row {line}: {e}")))?;
            let member = EndMember::parse(&rec[0])
                .ok_or_else(|| ThermoError::Data(format!("row {line}: unknown end member {:?}", &rec[0])))?;
            let num = |k: usize| -> Result<f64, ThermoError> {
                rec[k]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ThermoError::Data(format!("row {line}, column {}: not a number", cols[k])))
            };
            let (t, v) = (num(1)?, num(2)?);
            let log_k = match quantity {
                Quantity::LogKsp => v,
                Quantity::GStandard => {
                    let mu = member.cation().mu0() + super::Species::SO4.mu0();
                    (v - mu) / (R * kelvin(t) * std::f64::consts::LN_10)
                }
            };
            tables[member.index()].push((t, log_k));
        }
        for (k, table) in tables.iter_mut().enumerate() {
            table.sort_by(|a, b| a.0.total_cmp(&b.0));
            if table.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(ThermoError::Data(format!(
                    "duplicate temperature for {}",
                    EndMember::ALL[k].name()
                )));
            }
        }
        Ok(Self {
            tables,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    /// Hex SHA-256 of the CSV text this table was parsed from.
    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    pub fn has(&self, member: EndMember) -> bool {
        !self.tables[member.index()].is_empty()
    }

    /// `log10 Ksp` of `member` at `t_celsius`.
    pub fn log_ksp(&self, member: EndMember, t_celsius: f64) -> Result<f64, ThermoError> {
        let table = &self.tables[member.index()];
        let out_of_table = || ThermoError::OutOfTable {
            member: member.name(),
            t_celsius,
            lo: table.first().map_or(f64::NAN, |p| p.0),
            hi: table.last().map_or(f64::NAN, |p| p.0),
        };
        match table.as_slice() {
            [] => Err(out_of_table()),
            [(_, v)] => Ok(*v),
            _ => {
                let (lo, hi) = (table[0].0, table[table.len() - 1].0);
                if !(lo - 1e-9..=hi + 1e-9).contains(&t_celsius) {
                    return Err(out_of_table());
                }
                let xs: Vec<f64> = table.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = table.iter().map(|p| p.1).collect();
                Ok(super::interp_clamped(&xs, &ys, t_celsius))
            }
        }
    }

    /// Standard Gibbs energy of formation of the pure solid, J/mol.
    pub fn g_standard(&self, member: EndMember, t_celsius: f64) -> Result<f64, ThermoError> {
        let log_k = self.log_ksp(member, t_celsius)?;
        let mu = member.cation().mu0() + super::Species::SO4.mu0();
        Ok(mu + R * kelvin(t_celsius) * std::f64::consts::LN_10 * log_k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_loads() {
        let d = ThermoData::default();
        assert_eq!(d.log_ksp(EndMember::BaSO4, 25.0).unwrap(), -9.97);
        assert!((d.log_ksp(EndMember::RaSO4, 37.5).unwrap() - (-10.14)).abs() < 1e-12);
        assert_eq!(d.sha256().len(), 64);
        assert!(d.log_ksp(EndMember::SrSO4, 120.0).is_err());
    }

    #[test]
    fn gibbs_energy_column_round_trips() {
        let d = ThermoData::default();
        let g = d.g_standard(EndMember::BaSO4, 25.0).unwrap();
        let text = format!("end_member,T_celsius,G_standard_J_per_mol\nBaSO4,25,{g}\n");
        let e = ThermoData::from_csv_str(&text).unwrap();
        assert!((e.log_ksp(EndMember::BaSO4, 60.0).unwrap() + 9.97).abs() < 1e-12);
        assert!(!e.has(EndMember::RaSO4));
    }

    #[test]
    fn bad_files_name_the_problem() {
        let err = ThermoData::from_csv_str("a,b,c\n").unwrap_err();
        assert!(err.to_string().contains("header"));
        let err = ThermoData::from_csv_str("end_member,T_celsius,log_Ksp\nBaSO4,25,abc\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        let err = ThermoData::from_csv_str("end_member,T_celsius,log_Ksp\nCaSO4,25,-4\n").unwrap_err();
        assert!(err.to_string().contains("CaSO4"));
    }
}
