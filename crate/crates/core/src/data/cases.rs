use serde::{Deserialize, Serialize};

use super::DataError;
use crate::thermo::{EndMember, EquilibriumState, Recipe, SolidSolutionModel, Species};

pub const CEMENT_INPUTS: [&str; 3] = ["CaO", "SiO2", "H2O"];
pub const CEMENT_OUTPUTS: [&str; 18] = [
    "pH",
    "MassWater",
    "Ca(aq)",
    "Si(aq)",
    "O(aq)",
    "H(aq)",
    "Ca(s)",
    "Si(s)",
    "O(s)",
    "H(s)",
    "Portlandite",
    "AmorfSi",
    "mCSHQ",
    "Ca(ss)",
    "Si(ss)",
    "H2O(ss)",
    "V(s)",
    "Gel_water",
];

const MECH_INPUTS: [&str; 3] = ["BaSO4_umol", "NaCl_mmol", "RaBr2_umol"];
const MECH_OUTPUTS: [&str; 8] = [
    "pH",
    "ionic_strength",
    "m_Ra",
    "m_Ba",
    "m_SO4",
    "gamma_2",
    "n_RaSO4_s",
    "n_BaSO4_s",
];
const BINARY_INPUTS: [&str; 3] = ["BaSO4_umol", "RaBr2_umol", "T_C"];
const BINARY_OUTPUTS: [&str; 10] = [
    "pH",
    "ionic_strength",
    "m_Ra",
    "m_Ba",
    "m_SO4",
    "n_RaSO4_ss",
    "n_BaSO4_ss",
    "X_Ra",
    "lambda_Ra",
    "lambda_Ba",
];
const TERNARY_INPUTS: [&str; 4] = ["BaSO4_umol", "NaCl_mmol", "RaBr2_umol", "SrSO4_mmol"];
const TERNARY_OUTPUTS: [&str; 15] = [
    "pH",
    "ionic_strength",
    "m_Ra",
    "m_Ba",
    "m_Sr",
    "m_SO4",
    "n_RaSO4_ss",
    "n_BaSO4_ss",
    "n_SrSO4_ss",
    "X_Ra",
    "X_Ba",
    "X_Sr",
    "lambda_Ra",
    "lambda_Ba",
    "lambda_Sr",
];

/// Sampling range of one input column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputRange {
    pub lo: f64,
    pub hi: f64,
}

impl InputRange {
    /// Affine map from `[0, 1]` onto the range.
    pub fn scale(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

/// The four benchmark systems and their column schemas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStudy {
    Cement,
    MechMix,
    BinarySs,
    TernarySs,
}

impl CaseStudy {
    pub const ALL: [CaseStudy; 4] = [
        CaseStudy::Cement,
        CaseStudy::MechMix,
        CaseStudy::BinarySs,
        CaseStudy::TernarySs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseStudy::Cement => "cement",
            CaseStudy::MechMix => "mech_mix",
            CaseStudy::BinarySs => "binary_ss",
            CaseStudy::TernarySs => "ternary_ss",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DataError> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| DataError::UnknownCase(s.to_string()))
    }

    pub fn input_columns(self) -> &'static [&'static str] {
        match self {
            CaseStudy::Cement => &CEMENT_INPUTS,
            CaseStudy::MechMix => &MECH_INPUTS,
            CaseStudy::BinarySs => &BINARY_INPUTS,
            CaseStudy::TernarySs => &TERNARY_INPUTS,
        }
    }

    pub fn output_columns(self) -> &'static [&'static str] {
        match self {
            CaseStudy::Cement => &CEMENT_OUTPUTS,
            CaseStudy::MechMix => &MECH_OUTPUTS,
            CaseStudy::BinarySs => &BINARY_OUTPUTS,
            CaseStudy::TernarySs => &TERNARY_OUTPUTS,
        }
    }

    /// Identifies a case from a CSV header line.
    pub fn from_header(header: &str) -> Option<Self> {
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        Self::ALL.into_iter().find(|c| {
            let expect: Vec<&str> = c.input_columns().iter().chain(c.output_columns()).copied().collect();
            cols == expect
        })
    }

    /// Input ranges for oracle-generated cases; `None` for the cement data.
    pub fn input_ranges(self) -> Option<Vec<InputRange>> {
        let r = |lo, hi| InputRange { lo, hi };
        match self {
            CaseStudy::Cement => None,
            CaseStudy::MechMix => Some(vec![r(50.0, 500.0), r(50.0, 500.0), r(50.0, 500.0)]),
            CaseStudy::BinarySs => Some(vec![r(50.0, 500.0), r(50.0, 500.0), r(20.0, 90.0)]),
            CaseStudy::TernarySs => Some(vec![r(50.0, 500.0), r(50.0, 500.0), r(50.0, 500.0), r(5.0, 50.0)]),
        }
    }

    pub fn model(self) -> Option<SolidSolutionModel> {
        match self {
            CaseStudy::Cement => None,
            CaseStudy::MechMix => Some(SolidSolutionModel::mechanical()),
            CaseStudy::BinarySs => Some(SolidSolutionModel::binary()),
            CaseStudy::TernarySs => Some(SolidSolutionModel::ternary()),
        }
    }

    /// Builds a recipe from input values in column order. Inputs the case
    /// does not vary take their fixed values (NaCl 50 mmol for the binary
    /// case, 25 C elsewhere, no SrSO4 outside the ternary case).
    pub fn recipe(self, inputs: &[f64]) -> Result<Recipe, DataError> {
        if inputs.len() != self.input_columns().len() || self == CaseStudy::Cement {
            return Err(DataError::Invalid(format!(
                "{} takes {} oracle inputs, got {}",
                self.name(),
                self.input_columns().len(),
                inputs.len()
            )));
        }
        Ok(match self {
            CaseStudy::MechMix => Recipe::new(inputs[0], inputs[1], inputs[2], 0.0, 25.0),
            CaseStudy::BinarySs => Recipe::new(inputs[0], 50.0, inputs[1], 0.0, inputs[2]),
            CaseStudy::TernarySs => Recipe::new(inputs[0], inputs[1], inputs[2], inputs[3], 25.0),
            CaseStudy::Cement => unreachable!(),
        })
    }

    /// Input row of a recipe, inverse of [`CaseStudy::recipe`].
    pub fn inputs_of(self, r: &Recipe) -> Vec<f64> {
        match self {
            CaseStudy::MechMix => vec![r.baso4_umol, r.nacl_mmol, r.rabr2_umol],
            CaseStudy::BinarySs => vec![r.baso4_umol, r.rabr2_umol, r.t_celsius],
            CaseStudy::TernarySs => vec![r.baso4_umol, r.nacl_mmol, r.rabr2_umol, r.srso4_mmol],
            CaseStudy::Cement => Vec::new(),
        }
    }

    /// Output row of an equilibrium state in [`CaseStudy::output_columns`]
    /// order. Molalities in mol/kg, solid amounts in mol.
    pub fn outputs_of(self, st: &EquilibriumState) -> Vec<f64> {
        use EndMember::*;
        let m = |s: Species| st.molality(s);
        match self {
            CaseStudy::MechMix => vec![
                st.ph,
                st.ionic_strength,
                m(Species::Ra),
                m(Species::Ba),
                m(Species::SO4),
                st.gamma(Species::Ba),
                st.solid(RaSO4),
                st.solid(BaSO4),
            ],
            CaseStudy::BinarySs => vec![
                st.ph,
                st.ionic_strength,
                m(Species::Ra),
                m(Species::Ba),
                m(Species::SO4),
                st.solid(RaSO4),
                st.solid(BaSO4),
                st.fraction(RaSO4),
                st.lambda(RaSO4),
                st.lambda(BaSO4),
            ],
            CaseStudy::TernarySs => vec![
                st.ph,
                st.ionic_strength,
                m(Species::Ra),
                m(Species::Ba),
                m(Species::Sr),
                m(Species::SO4),
                st.solid(RaSO4),
                st.solid(BaSO4),
                st.solid(SrSO4),
                st.fraction(RaSO4),
                st.fraction(BaSO4),
                st.fraction(SrSO4),
                st.lambda(RaSO4),
                st.lambda(BaSO4),
                st.lambda(SrSO4),
            ],
            CaseStudy::Cement => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_sizes() {
        assert_eq!(CaseStudy::Cement.output_columns().len(), 18);
        assert_eq!(CaseStudy::MechMix.output_columns().len(), 8);
        assert_eq!(CaseStudy::BinarySs.output_columns().len(), 10);
        assert_eq!(CaseStudy::TernarySs.output_columns().len(), 15);
        assert_eq!(CaseStudy::TernarySs.input_columns().len(), 4);
    }

    #[test]
    fn header_detection_and_names() {
        for c in CaseStudy::ALL {
            let header: Vec<&str> = c.input_columns().iter().chain(c.output_columns()).copied().collect();
            assert_eq!(CaseStudy::from_header(&header.join(",")), Some(c));
            assert_eq!(CaseStudy::parse(c.name()).unwrap(), c);
        }
        assert!(CaseStudy::parse("granite").is_err());
    }

    #[test]
    fn affine_midpoint() {
        let r = InputRange { lo: 50.0, hi: 500.0 };
        assert_eq!(r.scale(0.5), 275.0);
        assert_eq!(r.scale(0.0), 50.0);
    }

    #[test]
    fn recipes_round_trip() {
        for c in [CaseStudy::MechMix, CaseStudy::BinarySs, CaseStudy::TernarySs] {
            let inputs: Vec<f64> = (0..c.input_columns().len()).map(|k| 60.0 + k as f64).collect();
            let r = c.recipe(&inputs).unwrap();
            assert_eq!(c.inputs_of(&r), inputs);
        }
        assert_eq!(CaseStudy::BinarySs.recipe(&[1.0, 2.0, 30.0]).unwrap().nacl_mmol, 50.0);
    }
}
