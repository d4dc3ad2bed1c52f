use super::{EndMember, ThermoError, R};
use serde::{Deserialize, Serialize};

const SIMPLEX_TOL: f64 = 1e-10;

fn check_simplex(x: &[f64]) -> Result<(), ThermoError> {
    let sum: f64 = x.iter().sum();
    if x.iter().any(|&v| !(0.0..=1.0 + SIMPLEX_TOL).contains(&v)) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(ThermoError::NotSimplex(x.to_vec()));
    }
    Ok(())
}

fn check_margules<const N: usize>(w: &[[f64; N]; N]) -> Result<(), ThermoError> {
    for i in 0..N {
        if w[i][i] != 0.0 {
            return Err(ThermoError::AsymmetricMargules);
        }
        for j in 0..i {
            if w[i][j] != w[j][i] || !w[i][j].is_finite() {
                return Err(ThermoError::AsymmetricMargules);
            }
        }
    }
    Ok(())
}

fn check_temperature(t_kelvin: f64) -> Result<(), ThermoError> {
    if t_kelvin > 0.0 && t_kelvin.is_finite() {
        Ok(())
    } else {
        Err(ThermoError::Temperature(t_kelvin))
    }
}

/// Mole-fraction-weighted sum of end-member Gibbs energies, J/mol.
pub fn g_mechanical<const N: usize>(x: &[f64; N], g0: &[f64; N]) -> Result<f64, ThermoError> {
    check_simplex(x)?;
    Ok(x.iter().zip(g0).map(|(x, g)| x * g).sum())
}

/// Ideal mixing term `R T sum x ln x`, with `0 ln 0 = 0`.
pub fn g_ideal_mix<const N: usize>(x: &[f64; N], t_kelvin: f64) -> Result<f64, ThermoError> {
    check_simplex(x)?;
    check_temperature(t_kelvin)?;
    Ok(R * t_kelvin * x.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>())
}

/// Regular-solution excess energy `sum_{i<j} x_i x_j w_ij`.
///
/// Every unordered pair contributes once, so `w` holds the full pairwise
/// interaction and is not halved.
pub fn g_excess<const N: usize>(x: &[f64; N], w: &[[f64; N]; N]) -> Result<f64, ThermoError> {
    check_simplex(x)?;
    check_margules(w)?;
    Ok(excess_unchecked(x, w))
}

fn excess_unchecked<const N: usize>(x: &[f64; N], w: &[[f64; N]; N]) -> f64 {
    let mut g = 0.0;
    for i in 0..N {
        for j in i + 1..N {
            g += x[i] * x[j] * w[i][j];
        }
    }
    g
}

/// Molar Gibbs energy of a solid of composition `x`.
///
/// The mechanical mixture keeps only the weighted end-member sum; the
/// regular variants add ideal mixing and the Margules excess.
pub fn g_total<const N: usize>(
    x: &[f64; N],
    g0: &[f64; N],
    w: &[[f64; N]; N],
    t_kelvin: f64,
    variant: MixingModel,
) -> Result<f64, ThermoError> {
    let mech = g_mechanical(x, g0)?;
    match variant {
        MixingModel::MechanicalMixture => Ok(mech),
        MixingModel::BinaryRegular | MixingModel::TernaryRegular => {
            Ok(mech + g_ideal_mix(x, t_kelvin)? + g_excess(x, w)?)
        }
    }
}

/// Activity coefficients `lambda_k` of a regular solid solution.
///
/// `R T ln lambda_k = sum_j w_kj x_j - G_ex(x)`, which is the partial molar
/// derivative of `n G_ex`.
pub fn solid_activity_coeffs<const N: usize>(
    x: &[f64; N],
    w: &[[f64; N]; N],
    t_kelvin: f64,
) -> Result<[f64; N], ThermoError> {
    check_simplex(x)?;
    check_margules(w)?;
    check_temperature(t_kelvin)?;
    let ln = ln_lambda_rt(x, w);
    Ok(ln.map(|v| (v / (R * t_kelvin)).exp()))
}

/// `R T ln lambda_k` without validation; `x` need not be normalised.
pub(crate) fn ln_lambda_rt<const N: usize>(x: &[f64; N], w: &[[f64; N]; N]) -> [f64; N] {
    let gex = excess_unchecked(x, w);
    let mut out = [0.0; N];
    for k in 0..N {
        out[k] = (0..N).map(|j| w[k][j] * x[j]).sum::<f64>() - gex;
    }
    out
}

/// How the sulfate end members combine into solids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingModel {
    /// Each end member precipitates as its own pure phase.
    MechanicalMixture,
    /// One (Ba,Ra)SO4 regular solid solution.
    BinaryRegular,
    /// One (Ba,Sr,Ra)SO4 regular solid solution.
    TernaryRegular,
}

impl MixingModel {
    pub fn name(self) -> &'static str {
        match self {
            MixingModel::MechanicalMixture => "mechanical mixture",
            MixingModel::BinaryRegular => "binary regular",
            MixingModel::TernaryRegular => "ternary regular",
        }
    }
}

/// A mixing variant together with its Margules interaction parameters,
/// indexed by [`EndMember::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolidSolutionModel {
    pub variant: MixingModel,
    margules: [[f64; 3]; 3],
}

impl SolidSolutionModel {
    pub const W_RA_BA: f64 = 2470.0;
    pub const W_SR_RA: f64 = 1750.0;
    pub const W_SR_BA: f64 = 750.0;

    pub fn new(variant: MixingModel) -> Self {
        let mut m = Self {
            variant,
            margules: [[0.0; 3]; 3],
        };
        m.set_interaction(EndMember::RaSO4, EndMember::BaSO4, Self::W_RA_BA);
        m.set_interaction(EndMember::SrSO4, EndMember::RaSO4, Self::W_SR_RA);
        m.set_interaction(EndMember::SrSO4, EndMember::BaSO4, Self::W_SR_BA);
        m
    }

    pub fn mechanical() -> Self {
        Self::new(MixingModel::MechanicalMixture)
    }

    pub fn binary() -> Self {
        Self::new(MixingModel::BinaryRegular)
    }

    pub fn ternary() -> Self {
        Self::new(MixingModel::TernaryRegular)
    }

    /// Replaces the full interaction matrix after checking symmetry.
    pub fn with_margules(mut self, w: [[f64; 3]; 3]) -> Result<Self, ThermoError> {
        check_margules(&w)?;
        self.margules = w;
        Ok(self)
    }

    pub fn set_interaction(&mut self, a: EndMember, b: EndMember, w: f64) {
        if a != b {
            self.margules[a.index()][b.index()] = w;
            self.margules[b.index()][a.index()] = w;
        }
    }

    pub fn interaction(&self, a: EndMember, b: EndMember) -> f64 {
        self.margules[a.index()][b.index()]
    }

    pub fn margules(&self) -> &[[f64; 3]; 3] {
        &self.margules
    }

    /// End members the model can place in a solid.
    pub fn members(&self) -> &'static [EndMember] {
        match self.variant {
            MixingModel::MechanicalMixture | MixingModel::TernaryRegular => &EndMember::ALL,
            MixingModel::BinaryRegular => &[EndMember::BaSO4, EndMember::RaSO4],
        }
    }

    pub fn is_solution(&self) -> bool {
        self.variant != MixingModel::MechanicalMixture
    }

    /// `R T ln lambda` for a composition over all three end members.
    /// Zero for the mechanical mixture.
    pub fn ln_lambda_rt(&self, x: &[f64; 3]) -> [f64; 3] {
        if self.is_solution() {
            ln_lambda_rt(x, &self.margules)
        } else {
            [0.0; 3]
        }
    }

    /// Excess energy per mole of solid for a composition over all three end
    /// members. Zero for the mechanical mixture.
    pub fn excess(&self, x: &[f64; 3]) -> f64 {
        if self.is_solution() {
            excess_unchecked(x, &self.margules)
        } else {
            0.0
        }
    }
}
