//! Measurements shared by the integration tests and the acceptance run.
//! Each function returns the worst value it saw, so callers decide what
//! tolerance to hold it to.
#![allow(dead_code)]

use std::f64::consts::LN_10;

use geokan::autodiff::Graph;
use geokan::data::CaseStudy;
use geokan::nn::Activation;
use geokan::thermo::{equilibrate, gibbs_energy, state_at, EndMember, EquilibriumState, Species};
use geokan::{KanConfig, MlpConfig, Network, NetworkConfig, Recipe, SolidSolutionModel, SplineGrid, Tensor, ThermoData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- gradients

#[derive(Debug, Clone, Copy, Default)]
pub struct GradientCheck {
    pub models: usize,
    pub kans: usize,
    pub parameters: usize,
    /// Largest `|g - g_fd|_2 / max(|g|_2, |g_fd|_2)` over all models.
    pub worst_relative: f64,
}

fn loss(net: &Network, x: &Tensor, y: &Tensor) -> f64 {
    let p = net.predict(x).unwrap();
    p.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
}

fn random_config(rng: &mut ChaCha8Rng, kan: bool) -> NetworkConfig {
    let p = rng.random_range(1..=4);
    let q = rng.random_range(1..=3);
    let hidden: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=8)).collect();
    if kan {
        NetworkConfig::Kan(KanConfig::new(p, hidden, q, rng.random_range(1..=4), rng.random_range(3..=8)))
    } else {
        let act = if rng.random_bool(0.5) { Activation::Mish } else { Activation::Silu };
        NetworkConfig::Mlp(MlpConfig::new(p, hidden, q, act))
    }
}

/// Compares reverse-mode gradients of an MSE loss with central differences
/// on `models` random networks, alternating MLPs and KANs.
pub fn gradient_check(models: usize, seed: u64) -> GradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradientCheck::default();
    for m in 0..models {
        let kan = m % 2 == 1;
        let cfg = random_config(&mut rng, kan);
        let mut net = Network::init(&cfg, rng.random()).unwrap();
        let rows = 6;
        let x = Tensor::new(
            vec![rows, cfg.input_dim()],
            (0..rows * cfg.input_dim()).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let y = Tensor::new(
            vec![rows, cfg.output_dim()],
            (0..rows * cfg.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();

        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let yv = g.constant(y.clone());
        let fwd = net.forward(&mut g, xv).unwrap();
        let l = g.mse(fwd.output, yv).unwrap();
        g.backward(l).unwrap();
        let analytic: Vec<f64> = fwd.params.iter().flat_map(|&v| g.grad(v).unwrap().to_vec()).collect();

        let mut numeric = Vec::with_capacity(analytic.len());
        let n_tensors = net.params().len();
        for t in 0..n_tensors {
            for j in 0..net.params()[t].len() {
                let theta = net.params()[t].data()[j];
                let h = 1e-6;
                net.params_mut()[t].data_mut()[j] = theta + h;
                let up = loss(&net, &x, &y);
                net.params_mut()[t].data_mut()[j] = theta - h;
                let down = loss(&net, &x, &y);
                net.params_mut()[t].data_mut()[j] = theta;
                numeric.push((up - down) / (2.0 * h));
            }
        }
        assert_eq!(numeric.len(), analytic.len());
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&analytic).max(norm(&numeric));
        let rel = if scale == 0.0 { 0.0 } else { norm(&diff) / scale };
        out.worst_relative = out.worst_relative.max(rel);
        out.models += 1;
        out.kans += usize::from(kan);
        out.parameters += analytic.len();
    }
    out
}

// ------------------------------------------------------------------ splines

#[derive(Debug, Clone, Copy, Default)]
pub struct SplineCheck {
    pub grids: usize,
    pub worst_partition: f64,
    pub worst_cubic_knot: f64,
    pub worst_derivative_sum: f64,
}

/// Partition of unity and derivative sums at `points` evenly spread points
/// for every degree in `degrees` and interval count in `intervals`, plus
/// the cubic values at interior knots.
pub fn spline_check(
    degrees: std::ops::RangeInclusive<usize>,
    intervals: std::ops::RangeInclusive<usize>,
    points: usize,
) -> SplineCheck {
    let mut out = SplineCheck::default();
    for d in degrees {
        for g in intervals.clone() {
            let grid = SplineGrid::new(d, g, -1.0, 1.0).unwrap();
            out.grids += 1;
            for i in 0..points {
                let x = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
                let b = grid.basis_eval(x).unwrap();
                let db = grid.basis_derivative(x).unwrap();
                out.worst_partition = out.worst_partition.max((b.iter().sum::<f64>() - 1.0).abs());
                out.worst_derivative_sum = out.worst_derivative_sum.max(db.iter().sum::<f64>().abs());
            }
        }
    }
    for g in 5..=15 {
        let grid = SplineGrid::new(3, g, 0.0, 1.0).unwrap();
        for k in 1..g {
            let x = grid.knots()[3 + k];
            let b = grid.basis_eval(x).unwrap();
            let nz: Vec<f64> = b.iter().copied().filter(|v| *v != 0.0).collect();
            let want = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];
            let err = if nz.len() == 3 {
                nz.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            out.worst_cubic_knot = out.worst_cubic_knot.max(err);
        }
    }
    out
}

// ------------------------------------------------------------------- oracle

pub fn model_of(case: CaseStudy) -> SolidSolutionModel {
    case.model().expect("oracle case")
}

/// Uniform random recipe within the sampling ranges of `case`.
pub fn random_recipe(case: CaseStudy, rng: &mut ChaCha8Rng) -> Recipe {
    let x: Vec<f64> = case
        .input_ranges()
        .unwrap()
        .iter()
        .map(|r| r.scale(rng.random_range(0.0..1.0)))
        .collect();
    case.recipe(&x).unwrap()
}

fn ln_activity(st: &EquilibriumState, s: Species) -> f64 {
    (st.molality(s) * st.gamma(s)).ln()
}

/// `ln IAP - ln Ksp` of an end member in a state.
pub fn saturation(st: &EquilibriumState, data: &ThermoData, m: EndMember) -> f64 {
    ln_activity(st, m.cation()) + ln_activity(st, Species::SO4) - data.log_ksp(m, st.recipe.t_celsius).unwrap() * LN_10
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BalanceCheck {
    pub recipes: usize,
    pub failures: usize,
    pub worst_mass: f64,
    /// mol/kg
    pub worst_charge: f64,
    /// Largest violation of the optimality conditions, in units of RT.
    pub worst_kkt: f64,
}

/// Mass balance, charge balance and optimality on random recipes.
///
/// Optimality means: a precipitated end member sits at its saturation
/// `ln IAP = ln Ksp + ln(x lambda)`, a pure phase absent from the solid is
/// undersaturated, and with no solid solution present the sum of the
/// saturation ratios is at most one.
pub fn balance_check(case: CaseStudy, n: usize, seed: u64, data: &ThermoData) -> BalanceCheck {
    let model = model_of(case);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BalanceCheck::default();
    for _ in 0..n {
        let r = random_recipe(case, &mut rng);
        out.recipes += 1;
        let st = match equilibrate(&r, &model, data) {
            Ok(st) => st,
            Err(_) => {
                out.failures += 1;
                continue;
            }
        };
        out.worst_mass = out.worst_mass.max(st.mass_balance_residual());
        out.worst_charge = out.worst_charge.max(st.charge_balance_residual());
        let present: Vec<EndMember> = model
            .members()
            .iter()
            .copied()
            .filter(|&m| st.recipe.totals().unwrap().cation(m) > 0.0)
            .collect();
        let kkt = if model.is_solution() {
            if st.solid_present() {
                present
                    .iter()
                    .map(|&m| (saturation(&st, data, m) - (st.fraction(m) * st.lambda(m)).ln()).abs())
                    .fold(0.0, f64::max)
            } else {
                let total: f64 = present.iter().map(|&m| saturation(&st, data, m).exp()).sum();
                (total.ln()).max(0.0)
            }
        } else {
            present
                .iter()
                .map(|&m| {
                    let si = saturation(&st, data, m);
                    if st.solid(m) > 0.0 {
                        si.abs()
                    } else {
                        si.max(0.0)
                    }
                })
                .fold(0.0, f64::max)
        };
        out.worst_kkt = out.worst_kkt.max(kkt);
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GridCheck {
    pub instances: usize,
    /// Largest `|G_solver - G_grid| / |G|`.
    pub worst_relative: f64,
    /// Largest amount by which a grid point beat the solver, relative to `|G|`.
    pub worst_grid_win: f64,
}

/// Brute-force minimum of the total Gibbs energy over a `side x side` grid
/// of (RaSO4, BaSO4) solid amounts for random binary recipes.
pub fn grid_check(instances: usize, side: usize, seed: u64, data: &ThermoData) -> GridCheck {
    let case = CaseStudy::BinarySs;
    let model = model_of(case);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GridCheck::default();
    let (ra, ba) = (EndMember::RaSO4.index(), EndMember::BaSO4.index());
    for _ in 0..instances {
        let r = random_recipe(case, &mut rng);
        let st = equilibrate(&r, &model, data).unwrap();
        let g_solver = gibbs_energy(&r, &model, data, &st.solids).unwrap();
        let t = r.totals().unwrap();
        let mut g_grid = f64::INFINITY;
        for i in 0..side {
            for j in 0..side {
                let mut s = [0.0; 3];
                s[ra] = t.ra * i as f64 / side as f64;
                s[ba] = t.ba * j as f64 / side as f64;
                if let Ok(g) = gibbs_energy(&r, &model, data, &s) {
                    g_grid = g_grid.min(g);
                }
            }
        }
        let scale = g_solver.abs();
        out.worst_relative = out.worst_relative.max((g_solver - g_grid).abs() / scale);
        out.worst_grid_win = out.worst_grid_win.max((g_solver - g_grid).max(0.0) / scale);
        out.instances += 1;
    }
    out
}

/// Root in `[lo, hi]` of a decreasing function.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolubilityCheck {
    pub recipes: usize,
    /// Precipitated end members compared.
    pub compared: usize,
    pub worst_relative: f64,
}

/// For each end member precipitated under the mechanical mixture, the
/// amount at which that pure phase alone is saturated (other solids held
/// at the solver's values), found by bisection on the saturation index.
pub fn solubility_check(n: usize, seed: u64, data: &ThermoData) -> SolubilityCheck {
    let case = CaseStudy::MechMix;
    let model = model_of(case);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SolubilityCheck::default();
    for _ in 0..n {
        let r = random_recipe(case, &mut rng);
        let st = equilibrate(&r, &model, data).unwrap();
        let t = r.totals().unwrap();
        out.recipes += 1;
        for m in EndMember::ALL {
            let k = m.index();
            if st.solid(m) <= 0.0 {
                continue;
            }
            let others: f64 = st.solids.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| v).sum();
            let hi = t.cation(m).min(t.s - others);
            let si = |v: f64| {
                let mut s = st.solids;
                s[k] = v;
                match state_at(&r, &model, data, &s) {
                    Ok(x) if x.molality(m.cation()) > 0.0 && x.molality(Species::SO4) > 0.0 => saturation(&x, data, m),
                    _ => f64::NEG_INFINITY,
                }
            };
            let root = bisect(si, 0.0, hi);
            out.worst_relative = out.worst_relative.max((root - st.solid(m)).abs() / root);
            out.compared += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExcessCheck {
    pub samples: usize,
    /// Largest `|RT ln lambda - d(n G_ex)/dn_k|`, relative to `max(1 J, |RT ln lambda|)`.
    pub worst_relative: f64,
}

/// Analytic `RT ln lambda_k` against a central difference of the total
/// excess energy in the amount of end member `k`.
pub fn excess_check(samples: usize, seed: u64) -> ExcessCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ExcessCheck::default();
    for model in [SolidSolutionModel::binary(), SolidSolutionModel::ternary()] {
        let members = model.members();
        for _ in 0..samples {
            let mut n = [0.0; 3];
            for &m in members {
                n[m.index()] = rng.random_range(0.01..1.0);
            }
            let total_excess = |n: &[f64; 3]| {
                let sum: f64 = n.iter().sum();
                sum * model.excess(&n.map(|v| v / sum))
            };
            let sum: f64 = n.iter().sum();
            let analytic = model.ln_lambda_rt(&n.map(|v| v / sum));
            for &m in members {
                let k = m.index();
                let h = 1e-5 * n[k];
                let (mut up, mut down) = (n, n);
                up[k] += h;
                down[k] -= h;
                let numeric = (total_excess(&up) - total_excess(&down)) / (2.0 * h);
                let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(1.0);
                out.worst_relative = out.worst_relative.max(rel);
            }
            out.samples += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FaceCheck {
    pub recipes: usize,
    /// Largest relative difference between the binary model and the
    /// ternary model restricted to its Ba-Ra face, over solids,
    /// molalities, pH and `RT ln lambda`.
    pub worst_relative: f64,
}

pub fn face_check(n: usize, seed: u64, data: &ThermoData) -> FaceCheck {
    let (binary, ternary) = (SolidSolutionModel::binary(), SolidSolutionModel::ternary());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = FaceCheck::default();
    let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
    for _ in 0..n {
        let r = random_recipe(CaseStudy::BinarySs, &mut rng);
        let a = equilibrate(&r, &binary, data).unwrap();
        let b = equilibrate(&r, &ternary, data).unwrap();
        let mut worst: f64 = rel(a.ph, b.ph);
        for (x, y) in a.solids.iter().zip(&b.solids).chain(a.molalities.iter().zip(&b.molalities)) {
            worst = worst.max(rel(*x, *y));
        }
        let x_ra: f64 = rng.random_range(0.0..1.0);
        let mut x = [0.0; 3];
        x[EndMember::RaSO4.index()] = x_ra;
        x[EndMember::BaSO4.index()] = 1.0 - x_ra;
        for (p, q) in binary.ln_lambda_rt(&x).iter().zip(ternary.ln_lambda_rt(&x)) {
            worst = worst.max(rel(*p, q));
        }
        out.worst_relative = out.worst_relative.max(worst);
        out.recipes += 1;
    }
    out
}
