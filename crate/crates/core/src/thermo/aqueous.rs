//! Extended Debye–Hückel activity model and water dissociation.

use super::{interp_clamped, Species, NUM_SPECIES};

const T_TABLE: [f64; 12] = [0.0, 10.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0];
const A_TABLE: [f64; 12] = [
    0.4913, 0.4976, 0.5050, 0.5092, 0.5135, 0.5221, 0.5319, 0.5425, 0.5537, 0.5658, 0.5788, 0.5929,
];
const B_TABLE: [f64; 12] = [
    0.3247, 0.3261, 0.3276, 0.3283, 0.3291, 0.3307, 0.3325, 0.3343, 0.3362, 0.3381, 0.3401, 0.3422,
];

/// Ion-size parameter shared by all ions inside the equilibrium solver, Å.
pub const COMMON_ION_SIZE: f64 = 3.72;

/// Debye–Hückel `A` in kg^1/2 mol^-1/2 (decadic), linear in T between
/// tabulated points and clamped outside 0..100 C.
pub fn debye_huckel_a(t_celsius: f64) -> f64 {
    interp_clamped(&T_TABLE, &A_TABLE, t_celsius)
}

/// Debye–Hückel `B` in kg^1/2 mol^-1/2 Å^-1.
pub fn debye_huckel_b(t_celsius: f64) -> f64 {
    interp_clamped(&T_TABLE, &B_TABLE, t_celsius)
}

/// Per-ion size parameters in Å, in [`Species`] order.
pub fn default_ion_sizes() -> [f64; NUM_SPECIES] {
    let mut a = [0.0; NUM_SPECIES];
    for s in Species::ALL {
        a[s.index()] = match s {
            Species::Ba | Species::Sr | Species::Ra => 5.0,
            Species::Na | Species::SO4 => 4.0,
            Species::Cl | Species::Br => 3.0,
            Species::H => 9.0,
            Species::OH => 3.5,
        };
    }
    a
}

/// `I = 1/2 sum m z^2`.
pub fn ionic_strength(molalities: &[f64; NUM_SPECIES]) -> f64 {
    0.5 * Species::ALL
        .iter()
        .map(|s| molalities[s.index()] * f64::from(s.charge() * s.charge()))
        .sum::<f64>()
}

/// `log10 gamma = -A z^2 sqrt(I) / (1 + B a sqrt(I))`.
pub fn log10_gamma(charge: i32, ionic_strength: f64, a: f64, b: f64, ion_size: f64) -> f64 {
    let sqrt_i = ionic_strength.max(0.0).sqrt();
    -a * f64::from(charge * charge) * sqrt_i / (1.0 + b * ion_size * sqrt_i)
}

/// Activity coefficients with the default per-ion sizes.
pub fn aqueous_activity_coeffs(molalities: &[f64; NUM_SPECIES], t_celsius: f64) -> [f64; NUM_SPECIES] {
    aqueous_activity_coeffs_with(molalities, t_celsius, &default_ion_sizes())
}

pub fn aqueous_activity_coeffs_with(
    molalities: &[f64; NUM_SPECIES],
    t_celsius: f64,
    ion_sizes: &[f64; NUM_SPECIES],
) -> [f64; NUM_SPECIES] {
    let i = ionic_strength(molalities);
    let (a, b) = (debye_huckel_a(t_celsius), debye_huckel_b(t_celsius));
    let mut g = [1.0; NUM_SPECIES];
    for s in Species::ALL {
        g[s.index()] = 10f64.powf(log10_gamma(s.charge(), i, a, b, ion_sizes[s.index()]));
    }
    g
}

/// `-log10 Kw` for water dissociation at `t_kelvin`.
pub fn pkw(t_kelvin: f64) -> f64 {
    4470.99 / t_kelvin - 6.0875 + 0.01706 * t_kelvin
}

/// `F(I) = int_0^I sqrt(s) / (1 + b sqrt(s)) ds`, whose derivative is the
/// Debye–Hückel shape factor. The excess Gibbs energy of the solution is
/// `-2 RT ln10 A w F(I)` for `w` kg of water.
pub(crate) fn dh_integral(i: f64, b: f64) -> f64 {
    let sqrt_i = i.max(0.0).sqrt();
    let x = b * sqrt_i;
    if x < 0.1 {
        // F = 2 I^{3/2} sum_{k>=3} (-1)^{k+1} x^{k-3} / k
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 3..40 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * p / k as f64;
            p *= x;
        }
        2.0 * i * sqrt_i * sum
    } else {
        let u = 1.0 + x;
        2.0 / (b * b * b) * ((u * u - 1.0) / 2.0 - 2.0 * (u - 1.0) + u.ln())
    }
}

/// `F'(I) = sqrt(I) / (1 + b sqrt(I))`.
pub(crate) fn dh_shape(i: f64, b: f64) -> f64 {
    let s = i.max(0.0).sqrt();
    s / (1.0 + b * s)
}

/// `F''(I) = 1 / (2 sqrt(I) (1 + b sqrt(I))^2)`; infinite at `I = 0`.
pub(crate) fn dh_curvature(i: f64, b: f64) -> f64 {
    let s = i.max(0.0).sqrt();
    1.0 / (2.0 * s * (1.0 + b * s).powi(2))
}
