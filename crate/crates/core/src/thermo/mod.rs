//! Thermodynamics of (Ba,Sr,Ra)SO4 solids in contact with a NaCl brine.
//!
//! The system holds nine aqueous ions ([`Species`]), water, and up to three
//! sulfate end members ([`EndMember`]). [`equilibrate`] minimises the total
//! Gibbs energy of one kilogram of water plus solids subject to elemental
//! mass balance. The aqueous phase uses molality-based ideal mixing with an
//! extended Debye–Hückel excess term; the solid side is either a set of pure
//! phases or one regular solid solution.
//!
//! Energies are in J and J/mol, amounts in mol, molalities in mol/kg and
//! temperatures in degrees Celsius at the public surface (kelvin inside).

mod aqueous;
mod data;
mod equilibrium;
mod mixing;

pub use aqueous::{
    aqueous_activity_coeffs, aqueous_activity_coeffs_with, debye_huckel_a, debye_huckel_b, default_ion_sizes,
    ionic_strength, log10_gamma, pkw, COMMON_ION_SIZE,
};
pub use data::{ThermoData, DEFAULT_THERMO_CSV};
pub use equilibrium::{
    batch_equilibrate, equilibrate, gibbs_energy, state_at, BatchResult, EquilibriumState, Recipe, Totals, MAX_ITERATIONS,
};
pub use mixing::{
    g_excess, g_ideal_mix, g_mechanical, g_total, solid_activity_coeffs, MixingModel, SolidSolutionModel,
};

use thiserror::Error;

/// Gas constant, J/(mol K).
pub const R: f64 = 8.314462618;
/// Molar mass of water, kg/mol.
pub const WATER_MOLAR_MASS: f64 = 0.018_015_28;
pub const KELVIN: f64 = 273.15;

#[derive(Debug, Error, PartialEq)]
pub enum ThermoError {
    #[error("mole fractions must be non-negative and sum to 1 (got {0:?})")]
    NotSimplex(Vec<f64>),
    #[error("Margules matrix must be symmetric with a zero diagonal")]
    AsymmetricMargules,
    #[error("temperature must be positive (got {0} K)")]
    Temperature(f64),
    #[error("invalid recipe: {0}")]
    Recipe(String),
    #[error("{model} model does not support {member}")]
    UnsupportedMember { model: &'static str, member: &'static str },
    #[error("no data for {member} at {t_celsius} C (table covers {lo}..{hi} C)")]
    OutOfTable {
        member: &'static str,
        t_celsius: f64,
        lo: f64,
        hi: f64,
    },
    #[error("thermodynamic data: {0}")]
    Data(String),
    #[error("no convergence after {iterations} iterations (gradient residual {residual:e} RT)")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Solid end members, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EndMember {
    BaSO4,
    SrSO4,
    RaSO4,
}

impl EndMember {
    pub const ALL: [EndMember; 3] = [EndMember::BaSO4, EndMember::SrSO4, EndMember::RaSO4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EndMember::BaSO4 => "BaSO4",
            EndMember::SrSO4 => "SrSO4",
            EndMember::RaSO4 => "RaSO4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s.trim()))
    }

    /// The aqueous cation released on dissolution.
    pub fn cation(self) -> Species {
        match self {
            EndMember::BaSO4 => Species::Ba,
            EndMember::SrSO4 => Species::Sr,
            EndMember::RaSO4 => Species::Ra,
        }
    }
}

/// Aqueous ions, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Ba,
    Sr,
    Ra,
    Na,
    Cl,
    Br,
    SO4,
    H,
    OH,
}

pub const NUM_SPECIES: usize = 9;

impl Species {
    pub const ALL: [Species; NUM_SPECIES] = [
        Species::Ba,
        Species::Sr,
        Species::Ra,
        Species::Na,
        Species::Cl,
        Species::Br,
        Species::SO4,
        Species::H,
        Species::OH,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn charge(self) -> i32 {
        match self {
            Species::Ba | Species::Sr | Species::Ra => 2,
            Species::Na | Species::H => 1,
            Species::Cl | Species::Br | Species::OH => -1,
            Species::SO4 => -2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Ba => "Ba+2",
            Species::Sr => "Sr+2",
            Species::Ra => "Ra+2",
            Species::Na => "Na+",
            Species::Cl => "Cl-",
            Species::Br => "Br-",
            Species::SO4 => "SO4-2",
            Species::H => "H+",
            Species::OH => "OH-",
        }
    }

    /// Standard chemical potential at 25 C, J/mol. `OH-` depends on
    /// temperature through the water dissociation constant and is handled
    /// by the caller.
    pub(crate) fn mu0(self) -> f64 {
        match self {
            Species::Ba => -560_782.0,
            Species::Sr => -563_836.0,
            Species::Ra => -561_500.0,
            Species::Na => -261_881.0,
            Species::Cl => -131_217.0,
            Species::Br => -103_850.0,
            Species::SO4 => -744_004.0,
            Species::H => 0.0,
            Species::OH => f64::NAN,
        }
    }
}

/// Standard chemical potential of liquid water, J/mol.
pub(crate) const MU0_WATER: f64 = -237_140.0;

pub(crate) fn kelvin(t_celsius: f64) -> f64 {
    t_celsius + KELVIN
}

/// Piecewise-linear interpolation on sorted abscissae, clamped at the ends.
pub(crate) fn interp_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() == 1 || x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}
