//! Gibbs-energy minimisation for the sulfate–brine system.
//!
//! For fixed solid amounts `s` the aqueous phase is determined by mass
//! balance except for the water dissociation extent `xi` (moles of H+ and
//! OH-), which is solved by a short fixed-point iteration. The remaining
//! problem in `s` is smooth and convex:
//!
//! * pure phases (mechanical mixture): projected Newton on `s >= 0` with an
//!   active set;
//! * solid solution: a tangent-plane stability test decides whether the
//!   phase forms, then an interior Newton iteration with fraction-to-boundary
//!   steps and Armijo backtracking finds the optimum.
//!
//! The Hessian is exact apart from the weak coupling through `xi`.

use std::f64::consts::LN_10;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aqueous::{debye_huckel_a, debye_huckel_b, dh_curvature, dh_integral, dh_shape, pkw, COMMON_ION_SIZE};
use super::{
    kelvin, EndMember, MixingModel, SolidSolutionModel, Species, ThermoData, ThermoError, MU0_WATER, NUM_SPECIES, R,
    WATER_MOLAR_MASS,
};

pub const MAX_ITERATIONS: usize = 500;
const GRAD_TOL: f64 = 1e-10;
/// Accepted residual when the iteration has stalled at rounding level.
const STALL_TOL: f64 = 1e-8;
const FRACTION_TO_BOUNDARY: f64 = 0.995;
const ARMIJO: f64 = 1e-4;

/// Feed composition for one equilibrium calculation with 1 kg of water.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub baso4_umol: f64,
    pub nacl_mmol: f64,
    pub rabr2_umol: f64,
    pub srso4_mmol: f64,
    pub t_celsius: f64,
}

impl Recipe {
    pub fn new(baso4_umol: f64, nacl_mmol: f64, rabr2_umol: f64, srso4_mmol: f64, t_celsius: f64) -> Self {
        Self {
            baso4_umol,
            nacl_mmol,
            rabr2_umol,
            srso4_mmol,
            t_celsius,
        }
    }

    /// Elemental totals in mol.
    pub fn totals(&self) -> Result<Totals, ThermoError> {
        let fields = [
            ("BaSO4", self.baso4_umol),
            ("NaCl", self.nacl_mmol),
            ("RaBr2", self.rabr2_umol),
            ("SrSO4", self.srso4_mmol),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(ThermoError::Recipe(format!("{name} amount must be finite and non-negative, got {v}")));
            }
        }
        if !self.t_celsius.is_finite() || kelvin(self.t_celsius) <= 0.0 {
            return Err(ThermoError::Recipe(format!("temperature {} C is not physical", self.t_celsius)));
        }
        let ba = self.baso4_umol * 1e-6;
        let sr = self.srso4_mmol * 1e-3;
        let ra = self.rabr2_umol * 1e-6;
        let na = self.nacl_mmol * 1e-3;
        Ok(Totals {
            ba,
            sr,
            ra,
            na,
            cl: na,
            br: 2.0 * ra,
            s: ba + sr,
        })
    }
}

/// Elemental amounts in mol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Totals {
    pub ba: f64,
    pub sr: f64,
    pub ra: f64,
    pub na: f64,
    pub cl: f64,
    pub br: f64,
    pub s: f64,
}

impl Totals {
    pub fn cation(&self, m: EndMember) -> f64 {
        match m {
            EndMember::BaSO4 => self.ba,
            EndMember::SrSO4 => self.sr,
            EndMember::RaSO4 => self.ra,
        }
    }

    /// Amount of a species if everything were dissolved (H+/OH- excluded).
    fn species(&self, s: Species) -> f64 {
        match s {
            Species::Ba => self.ba,
            Species::Sr => self.sr,
            Species::Ra => self.ra,
            Species::Na => self.na,
            Species::Cl => self.cl,
            Species::Br => self.br,
            Species::SO4 => self.s,
            Species::H | Species::OH => 0.0,
        }
    }
}

/// Result of one equilibrium calculation. Arrays are indexed by
/// [`EndMember::index`] and [`Species::index`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumState {
    pub recipe: Recipe,
    pub variant: MixingModel,
    /// Solid end-member amounts, mol.
    pub solids: [f64; 3],
    /// Mole fractions within the solid (all zero when no solid formed).
    pub fractions: [f64; 3],
    /// Solid activity coefficients (1 for pure phases).
    pub lambdas: [f64; 3],
    /// Aqueous molalities, mol/kg water.
    pub molalities: [f64; NUM_SPECIES],
    pub gammas: [f64; NUM_SPECIES],
    pub ionic_strength: f64,
    pub ph: f64,
    pub water_activity: f64,
    /// Mass of solvent water, kg.
    pub water_kg: f64,
    /// Total Gibbs energy of water, solutes and solids, J.
    pub gibbs_energy: f64,
    pub iterations: usize,
    /// Largest optimality residual at exit, in units of RT.
    pub residual: f64,
}

impl EquilibriumState {
    pub fn solid(&self, m: EndMember) -> f64 {
        self.solids[m.index()]
    }

    pub fn fraction(&self, m: EndMember) -> f64 {
        self.fractions[m.index()]
    }

    pub fn lambda(&self, m: EndMember) -> f64 {
        self.lambdas[m.index()]
    }

    pub fn molality(&self, s: Species) -> f64 {
        self.molalities[s.index()]
    }

    pub fn gamma(&self, s: Species) -> f64 {
        self.gammas[s.index()]
    }

    pub fn solid_present(&self) -> bool {
        self.solids.iter().any(|&v| v > 0.0)
    }

    /// Largest relative deviation of any element from its feed total.
    pub fn mass_balance_residual(&self) -> f64 {
        let t = self.recipe.totals().expect("recipe was validated");
        let aq = |s: Species| self.molality(s) * self.water_kg;
        let checks = [
            (t.ba, aq(Species::Ba) + self.solid(EndMember::BaSO4)),
            (t.sr, aq(Species::Sr) + self.solid(EndMember::SrSO4)),
            (t.ra, aq(Species::Ra) + self.solid(EndMember::RaSO4)),
            (t.na, aq(Species::Na)),
            (t.cl, aq(Species::Cl)),
            (t.br, aq(Species::Br)),
            (t.s, aq(Species::SO4) + self.solids.iter().sum::<f64>()),
        ];
        checks
            .iter()
            .map(|&(total, found)| {
                let d = (found - total).abs();
                if total > 0.0 {
                    d / total
                } else {
                    d
                }
            })
            .fold(0.0, f64::max)
    }

    /// `|sum z m|` in mol/kg.
    pub fn charge_balance_residual(&self) -> f64 {
        Species::ALL
            .iter()
            .map(|s| f64::from(s.charge()) * self.molality(*s))
            .sum::<f64>()
            .abs()
    }
}

/// Aqueous phase for given solid amounts, with `xi` at its optimum.
#[derive(Debug, Clone)]
struct Aqueous {
    n: [f64; NUM_SPECIES],
    nw: f64,
    w: f64,
    i: f64,
    /// `ln gamma` at unit charge.
    ln_g1: f64,
    ln_aw: f64,
}

impl Aqueous {
    /// `ln a` of a species (`-inf` when absent).
    fn ln_a(&self, s: Species) -> f64 {
        let z = f64::from(s.charge());
        (self.n[s.index()] / self.w).ln() + z * z * self.ln_g1
    }
}

/// Everything about a recipe that does not depend on the solid amounts.
struct System<'a> {
    recipe: Recipe,
    model: &'a SolidSolutionModel,
    totals: Totals,
    rt: f64,
    a: f64,
    b: f64,
    ln_kw: f64,
    ln_ksp: [f64; 3],
    /// End members that may precipitate.
    active: Vec<EndMember>,
    water_total: f64,
}

impl<'a> System<'a> {
    fn new(recipe: &Recipe, model: &'a SolidSolutionModel, data: &ThermoData) -> Result<Self, ThermoError> {
        let totals = recipe.totals()?;
        let t_k = kelvin(recipe.t_celsius);
        for m in EndMember::ALL {
            if totals.cation(m) > 0.0 && !model.members().contains(&m) {
                return Err(ThermoError::UnsupportedMember {
                    model: model.variant.name(),
                    member: m.name(),
                });
            }
        }
        let mut ln_ksp = [f64::NAN; 3];
        let mut active = Vec::new();
        for &m in model.members() {
            if totals.cation(m) > 0.0 && totals.s > 0.0 {
                ln_ksp[m.index()] = data.log_ksp(m, recipe.t_celsius)? * LN_10;
                active.push(m);
            }
        }
        Ok(Self {
            recipe: *recipe,
            model,
            totals,
            rt: R * t_k,
            a: debye_huckel_a(recipe.t_celsius),
            b: debye_huckel_b(recipe.t_celsius) * COMMON_ION_SIZE,
            ln_kw: -pkw(t_k) * LN_10,
            ln_ksp,
            active,
            water_total: 1.0 / WATER_MOLAR_MASS,
        })
    }

    fn feasible(&self, s: &[f64; 3]) -> bool {
        let sum: f64 = s.iter().sum();
        s.iter().all(|&v| v >= 0.0)
            && EndMember::ALL.iter().all(|&m| s[m.index()] <= self.totals.cation(m))
            && sum <= self.totals.s
    }

    /// Every aqueous amount stays positive.
    fn strictly_feasible(&self, s: &[f64; 3]) -> bool {
        s.iter().all(|&v| v >= 0.0)
            && self.active.iter().all(|&m| s[m.index()] < self.totals.cation(m))
            && s.iter().sum::<f64>() < self.totals.s
    }

    fn aqueous(&self, s: &[f64; 3]) -> Aqueous {
        let mut n = [0.0; NUM_SPECIES];
        for sp in Species::ALL {
            n[sp.index()] = self.totals.species(sp);
        }
        for m in EndMember::ALL {
            n[m.cation().index()] = (n[m.cation().index()] - s[m.index()]).max(0.0);
        }
        n[Species::SO4.index()] = (self.totals.s - s.iter().sum::<f64>()).max(0.0);
        let half_z2: f64 = 0.5
            * Species::ALL
                .iter()
                .map(|sp| n[sp.index()] * f64::from(sp.charge() * sp.charge()))
                .sum::<f64>();
        let solutes: f64 = n.iter().sum();
        let mut xi = WATER_MOLAR_MASS * self.water_total * (0.5 * self.ln_kw).exp();
        let mut aq = Aqueous {
            n,
            nw: 0.0,
            w: 0.0,
            i: 0.0,
            ln_g1: 0.0,
            ln_aw: 0.0,
        };
        for _ in 0..100 {
            let nw = self.water_total - xi;
            let w = nw * WATER_MOLAR_MASS;
            let i = (half_z2 + xi) / w;
            let shape = dh_shape(i, self.b);
            let f = dh_integral(i, self.b);
            let ln_aw = -(solutes + 2.0 * xi) / nw + 2.0 * WATER_MOLAR_MASS * LN_10 * self.a * (i * shape - f);
            let ln_g1 = -LN_10 * self.a * shape;
            let next = w * (0.5 * (self.ln_kw + ln_aw) - ln_g1).exp();
            aq.nw = nw;
            aq.w = w;
            aq.i = i;
            aq.ln_g1 = ln_g1;
            aq.ln_aw = ln_aw;
            let done = (next - xi).abs() <= 1e-15 * xi;
            xi = next;
            if done {
                break;
            }
        }
        aq.n[Species::H.index()] = xi;
        aq.n[Species::OH.index()] = xi;
        aq
    }

    fn composition(&self, s: &[f64; 3]) -> ([f64; 3], f64) {
        let total: f64 = s.iter().sum();
        if total > 0.0 {
            (s.map(|v| v / total), total)
        } else {
            ([0.0; 3], 0.0)
        }
    }

    /// `dG/ds_k / RT` for every end member.
    fn gradient(&self, s: &[f64; 3], aq: &Aqueous) -> [f64; 3] {
        let ln_so4 = aq.ln_a(Species::SO4);
        let mut g = [0.0; 3];
        let (x, _) = self.composition(s);
        let ln_l = self.model.ln_lambda_rt(&x);
        for &m in &self.active {
            let k = m.index();
            let mut v = self.ln_ksp[k] - aq.ln_a(m.cation()) - ln_so4;
            if self.model.is_solution() {
                v += x[k].ln() + ln_l[k] / self.rt;
            }
            g[k] = v;
        }
        g
    }

    /// `(G - G_ref) / RT` where `G_ref` is the energy of the water and of
    /// every solute at its standard state with all solids dissolved.
    fn reduced_energy(&self, s: &[f64; 3], aq: &Aqueous) -> f64 {
        let xi = aq.n[Species::H.index()];
        let mut g = -xi * self.ln_kw;
        for &m in &self.active {
            g += s[m.index()] * self.ln_ksp[m.index()];
        }
        for &n in &aq.n {
            if n > 0.0 {
                g += n * ((n / aq.w).ln() - 1.0);
            }
        }
        g -= 2.0 * LN_10 * self.a * aq.w * dh_integral(aq.i, self.b);
        if self.model.is_solution() {
            let (x, total) = self.composition(s);
            if total > 0.0 {
                for &m in &self.active {
                    let k = m.index();
                    if s[k] > 0.0 {
                        g += s[k] * x[k].ln();
                    }
                }
                g += total * self.model.excess(&x) / self.rt;
            }
        }
        g
    }

    fn reference_energy(&self) -> f64 {
        let mut g = self.water_total * MU0_WATER;
        for sp in Species::ALL {
            if !matches!(sp, Species::H | Species::OH) {
                g += self.totals.species(sp) * sp.mu0();
            }
        }
        g
    }

    fn total_energy(&self, s: &[f64; 3], aq: &Aqueous) -> f64 {
        self.reference_energy() + self.rt * self.reduced_energy(s, aq)
    }

    /// Hessian of `G / RT` over `idx` (indices into the end-member arrays).
    fn hessian(&self, s: &[f64; 3], aq: &Aqueous, idx: &[usize]) -> DMatrix<f64> {
        let n = idx.len();
        let n_so4 = aq.n[Species::SO4.index()];
        let dh = if aq.i > 0.0 {
            -32.0 * LN_10 * self.a * dh_curvature(aq.i, self.b) / aq.w
        } else {
            0.0
        };
        let mut h = DMatrix::from_element(n, n, 1.0 / n_so4 + dh);
        for (r, &k) in idx.iter().enumerate() {
            h[(r, r)] += 1.0 / aq.n[EndMember::ALL[k].cation().index()];
        }
        if self.model.is_solution() {
            let (x, total) = self.composition(s);
            let w = self.model.margules();
            let wx: Vec<f64> = (0..3).map(|k| (0..3).map(|j| w[k][j] * x[j]).sum()).collect();
            let xwx: f64 = (0..3).map(|k| x[k] * wx[k]).sum();
            for (r, &k) in idx.iter().enumerate() {
                for (c, &l) in idx.iter().enumerate() {
                    let ideal = if k == l { 1.0 / x[k] } else { 0.0 } - 1.0;
                    let excess = (w[k][l] - wx[k] - wx[l] + xwx) / self.rt;
                    h[(r, c)] += (ideal + excess) / total;
                }
            }
        }
        h
    }

    /// Newton direction on the free variables; falls back to scaled
    /// steepest descent if the system is singular or not a descent.
    fn direction(&self, s: &[f64; 3], aq: &Aqueous, g: &[f64; 3], free: &[usize]) -> [f64; 3] {
        let h = self.hessian(s, aq, free);
        let rhs = DVector::from_iterator(free.len(), free.iter().map(|&k| -g[k]));
        let mut d = [0.0; 3];
        let newton = h.clone().cholesky().map(|c| c.solve(&rhs));
        match newton {
            Some(v) if v.iter().all(|x| x.is_finite()) => {
                for (r, &k) in free.iter().enumerate() {
                    d[k] = v[r];
                }
            }
            _ => {
                for (r, &k) in free.iter().enumerate() {
                    d[k] = -g[k] / h[(r, r)].abs().max(1e-300);
                }
            }
        }
        d
    }

    /// Largest step along `d` keeping every aqueous amount (and, for a
    /// solution, every solid amount) strictly positive.
    fn max_step(&self, s: &[f64; 3], aq: &Aqueous, d: &[f64; 3], interior_solids: bool) -> f64 {
        let mut alpha = f64::INFINITY;
        let sum_d: f64 = d.iter().sum();
        if sum_d > 0.0 {
            alpha = alpha.min(FRACTION_TO_BOUNDARY * aq.n[Species::SO4.index()] / sum_d);
        }
        for &m in &self.active {
            let k = m.index();
            if d[k] > 0.0 {
                alpha = alpha.min(FRACTION_TO_BOUNDARY * aq.n[m.cation().index()] / d[k]);
            }
            if interior_solids && d[k] < 0.0 {
                alpha = alpha.min(FRACTION_TO_BOUNDARY * s[k] / -d[k]);
            }
        }
        alpha
    }

    fn solve_pure_phases(&self) -> Result<([f64; 3], usize, f64), ThermoError> {
        let mut s = [0.0; 3];
        let mut aq = self.aqueous(&s);
        let mut energy = self.reduced_energy(&s, &aq);
        for it in 0..MAX_ITERATIONS {
            let g = self.gradient(&s, &aq);
            let mut free: Vec<usize> = self
                .active
                .iter()
                .map(|m| m.index())
                .filter(|&k| s[k] > 0.0 || g[k] < 0.0)
                .collect();
            let resid = free.iter().map(|&k| g[k].abs()).fold(0.0, f64::max);
            if resid <= GRAD_TOL {
                return Ok((s, it, resid));
            }
            let mut d = self.direction(&s, &aq, &g, &free);
            while let Some(pos) = free.iter().position(|&k| s[k] == 0.0 && d[k] < 0.0) {
                free.remove(pos);
                d = if free.is_empty() {
                    [0.0; 3]
                } else {
                    self.direction(&s, &aq, &g, &free)
                };
            }
            let mut alpha = self.max_step(&s, &aq, &d, false).min(1.0);
            for &k in &free {
                if d[k] < 0.0 {
                    alpha = alpha.min(s[k] / -d[k]);
                }
            }
            let mut accepted = None;
            for _ in 0..80 {
                let trial: [f64; 3] = std::array::from_fn(|k| {
                    let v = s[k] + alpha * d[k];
                    if v <= 1e-15 * s[k] {
                        0.0
                    } else {
                        v
                    }
                });
                if !self.strictly_feasible(&trial) {
                    alpha *= 0.5;
                    continue;
                }
                let step: [f64; 3] = std::array::from_fn(|k| trial[k] - s[k]);
                let predicted: f64 = (0..3).map(|k| g[k] * step[k]).sum();
                let t_aq = self.aqueous(&trial);
                let t_energy = self.reduced_energy(&trial, &t_aq);
                if t_energy <= energy + ARMIJO * predicted || predicted.abs() <= 1e-13 * energy.abs().max(1.0) {
                    accepted = Some((trial, t_aq, t_energy));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((trial, t_aq, t_energy)) if trial != s => {
                    s = trial;
                    aq = t_aq;
                    energy = t_energy;
                }
                _ => return self.stalled(s, it, resid),
            }
        }
        let g = self.gradient(&s, &aq);
        Err(ThermoError::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: self.active.iter().map(|m| g[m.index()].abs()).fold(0.0, f64::max),
        })
    }

    fn stalled(&self, s: [f64; 3], it: usize, resid: f64) -> Result<([f64; 3], usize, f64), ThermoError> {
        if resid <= STALL_TOL {
            Ok((s, it, resid))
        } else {
            Err(ThermoError::NoConvergence {
                iterations: it,
                residual: resid,
            })
        }
    }

    /// Tangent-plane test for the solid solution. Returns the trial
    /// composition when the phase is supersaturated.
    fn stability(&self) -> Option<[f64; 3]> {
        let aq = self.aqueous(&[0.0; 3]);
        let ln_so4 = aq.ln_a(Species::SO4);
        let mut ln_si = [f64::NEG_INFINITY; 3];
        for &m in &self.active {
            ln_si[m.index()] = aq.ln_a(m.cation()) + ln_so4 - self.ln_ksp[m.index()];
        }
        let mut x = softmax(&ln_si);
        let mut ln_z = f64::NEG_INFINITY;
        for _ in 0..MAX_ITERATIONS {
            let ln_l = self.model.ln_lambda_rt(&x);
            let ln_y: [f64; 3] = std::array::from_fn(|k| ln_si[k] - ln_l[k] / self.rt);
            let next = softmax(&ln_y);
            ln_z = log_sum_exp(&ln_y);
            let change = (0..3).map(|k| (next[k] - x[k]).abs()).fold(0.0, f64::max);
            x = std::array::from_fn(|k| 0.5 * (x[k] + next[k]));
            if change < 1e-13 {
                break;
            }
        }
        (ln_z > 0.0).then_some(x)
    }

    fn solve_solution(&self) -> Result<([f64; 3], usize, f64), ThermoError> {
        let Some(x0) = self.stability() else {
            return Ok(([0.0; 3], 0, 0.0));
        };
        let mut cap = self.totals.s;
        for &m in &self.active {
            cap = cap.min(self.totals.cation(m) / x0[m.index()]);
        }
        let mut s: [f64; 3] = std::array::from_fn(|k| 0.5 * cap * x0[k]);
        let mut aq = self.aqueous(&s);
        let mut energy = self.reduced_energy(&s, &aq);
        let free: Vec<usize> = self.active.iter().map(|m| m.index()).collect();
        for it in 0..MAX_ITERATIONS {
            let g = self.gradient(&s, &aq);
            let resid = free.iter().map(|&k| g[k].abs()).fold(0.0, f64::max);
            if resid <= GRAD_TOL {
                return Ok((s, it, resid));
            }
            let d = self.direction(&s, &aq, &g, &free);
            let mut alpha = self.max_step(&s, &aq, &d, true).min(1.0);
            let predicted_full: f64 = (0..3).map(|k| g[k] * d[k]).sum();
            let mut accepted = None;
            for _ in 0..80 {
                let trial: [f64; 3] = std::array::from_fn(|k| s[k] + alpha * d[k]);
                let t_aq = self.aqueous(&trial);
                let t_energy = self.reduced_energy(&trial, &t_aq);
                let predicted = alpha * predicted_full;
                if t_energy <= energy + ARMIJO * predicted || predicted.abs() <= 1e-13 * energy.abs().max(1.0) {
                    accepted = Some((trial, t_aq, t_energy));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((trial, t_aq, t_energy)) if trial != s => {
                    s = trial;
                    aq = t_aq;
                    energy = t_energy;
                }
                _ => return self.stalled(s, it, resid),
            }
        }
        let g = self.gradient(&s, &aq);
        Err(ThermoError::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: free.iter().map(|&k| g[k].abs()).fold(0.0, f64::max),
        })
    }

    fn state(&self, s: [f64; 3], iterations: usize, residual: f64) -> EquilibriumState {
        let aq = self.aqueous(&s);
        let (x, _) = self.composition(&s);
        let lambdas = if self.model.is_solution() {
            self.model.ln_lambda_rt(&x).map(|v| (v / self.rt).exp())
        } else {
            [1.0; 3]
        };
        let molalities = aq.n.map(|n| n / aq.w);
        let gammas = Species::ALL.map(|sp| {
            let z = f64::from(sp.charge());
            (z * z * aq.ln_g1).exp()
        });
        let ln_a_h = aq.ln_a(Species::H);
        EquilibriumState {
            recipe: self.recipe,
            variant: self.model.variant,
            solids: s,
            fractions: x,
            lambdas,
            molalities,
            gammas,
            ionic_strength: aq.i,
            ph: -ln_a_h / LN_10,
            water_activity: aq.ln_aw.exp(),
            water_kg: aq.w,
            gibbs_energy: self.total_energy(&s, &aq),
            iterations,
            residual,
        }
    }
}

fn log_sum_exp(v: &[f64; 3]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax(v: &[f64; 3]) -> [f64; 3] {
    let l = log_sum_exp(v);
    if l == f64::NEG_INFINITY {
        return [0.0; 3];
    }
    v.map(|x| (x - l).exp())
}

/// Equilibrium state of `recipe` under `model`.
///
/// Recipes in which no solid is supersaturated return a fully aqueous
/// state. Pure-phase variants precipitate each end member independently;
/// solution variants form at most one mixed solid.
pub fn equilibrate(
    recipe: &Recipe,
    model: &SolidSolutionModel,
    data: &ThermoData,
) -> Result<EquilibriumState, ThermoError> {
    let sys = System::new(recipe, model, data)?;
    let (s, iterations, residual) = if sys.active.is_empty() {
        ([0.0; 3], 0, 0.0)
    } else if model.is_solution() {
        sys.solve_solution()?
    } else {
        sys.solve_pure_phases()?
    };
    Ok(sys.state(s, iterations, residual))
}

/// The system with the given solid amounts held fixed and the aqueous
/// phase fixed by mass balance and water dissociation. The state is not an
/// equilibrium unless `solids` is the minimizer.
pub fn state_at(
    recipe: &Recipe,
    model: &SolidSolutionModel,
    data: &ThermoData,
    solids: &[f64; 3],
) -> Result<EquilibriumState, ThermoError> {
    let sys = System::new(recipe, model, data)?;
    if !sys.feasible(solids) {
        return Err(ThermoError::Recipe(format!("solid amounts {solids:?} violate mass balance")));
    }
    for m in EndMember::ALL {
        if solids[m.index()] > 0.0 && !sys.active.contains(&m) {
            return Err(ThermoError::UnsupportedMember {
                model: model.variant.name(),
                member: m.name(),
            });
        }
    }
    Ok(sys.state(*solids, 0, f64::NAN))
}

/// Total Gibbs energy in J at the given solid amounts; see [`state_at`].
pub fn gibbs_energy(
    recipe: &Recipe,
    model: &SolidSolutionModel,
    data: &ThermoData,
    solids: &[f64; 3],
) -> Result<f64, ThermoError> {
    state_at(recipe, model, data, solids).map(|st| st.gibbs_energy)
}

/// Results of [`batch_equilibrate`], in input order.
#[derive(Debug)]
pub struct BatchResult {
    pub states: Vec<Result<EquilibriumState, ThermoError>>,
    pub seconds: f64,
}

/// Equilibrates every recipe independently. `jobs > 1` spreads the work
/// over a dedicated thread pool; the output order never changes.
pub fn batch_equilibrate(
    recipes: &[Recipe],
    model: &SolidSolutionModel,
    data: &ThermoData,
    jobs: usize,
) -> BatchResult {
    let start = Instant::now();
    let states = if jobs <= 1 {
        recipes.iter().map(|r| equilibrate(r, model, data)).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| recipes.par_iter().map(|r| equilibrate(r, model, data)).collect()),
            Err(_) => recipes.iter().map(|r| equilibrate(r, model, data)).collect(),
        }
    };
    BatchResult {
        states,
        seconds: start.elapsed().as_secs_f64(),
    }
}
