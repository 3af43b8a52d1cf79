//! Property suites at desk scale, shared by the CLI `verify` command and the
//! acceptance tests.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::forward::{FieldHistory, SolverConfig, TimeGrid};
use crate::inversion::InverseProblem;
use crate::material::{energy, frobenius_dot, stress, stress_and_tangent, tangent_apply, DictionaryCoeffs, Mat3, NeoHookeanParams};
use crate::mesh::PlateMesh;
use crate::scenario::{build_excitation, ExcitationParams};
use crate::sensitivity::{adjoint_full, derivative_apply, gradient, space_time_norm, trapezoid_pairing};

/// One line of a verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance bound, e.g. `<= 1e-6`.
    pub bound: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("<= {limit:e}"),
            passed: value <= limit,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("< {limit}"),
            passed: value < limit,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&value),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<44} {:>12.4e}  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.bound
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Material,
    Adjoint,
    Taylor,
    Cone,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "material" => Ok(Self::Material),
            "adjoint" => Ok(Self::Adjoint),
            "taylor" => Ok(Self::Taylor),
            "cone" => Ok(Self::Cone),
            "all" => Ok(Self::All),
            _ => Err(Error::InvalidParameter(format!(
                "unknown suite '{s}' (expected material, adjoint, taylor, cone or all)"
            ))),
        }
    }
}

/// The 2x8x8 plate with `n = 8` knots and the default excitation.
pub struct Desk {
    pub disc: Discretization,
    pub tg: TimeGrid,
    pub force: FieldHistory,
    pub solver: SolverConfig,
}

impl Desk {
    pub fn new(steps: usize) -> Result<Self> {
        Self::with_solver(steps, SolverConfig::default())
    }

    pub fn with_solver(steps: usize, solver: SolverConfig) -> Result<Self> {
        let disc = Discretization::new(PlateMesh::plate([2, 8, 8])?, NeoHookeanParams::plate(), 8)?;
        let tg = TimeGrid::new(4.0, steps, 0.5)?;
        let force = build_excitation(&disc.mesh, &tg, &ExcitationParams::default())?;
        Ok(Self {
            disc,
            tg,
            force,
            solver,
        })
    }

    pub fn problem(&self) -> InverseProblem<'_> {
        InverseProblem {
            disc: &self.disc,
            tg: self.tg,
            force: &self.force,
            solver: self.solver,
        }
    }
}

/// Worst relative errors over random admissible states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialReport {
    pub stress_vs_energy: f64,
    pub tangent_vs_stress: f64,
    pub hessian_asymmetry: f64,
}

fn unit(i: usize) -> Mat3 {
    let mut e = Mat3::zeros();
    e[(i / 3, i % 3)] = 1.0;
    e
}

/// Central differences on `states` random displacement gradients with
/// `|Y_ij| < 0.3` and `det(I + Y) > 0.2`.
pub fn material_fd(params: &NeoHookeanParams, states: usize, seed: u64) -> Result<MaterialReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MaterialReport {
        stress_vs_energy: 0.0,
        tangent_vs_stress: 0.0,
        hessian_asymmetry: 0.0,
    };
    let mut done = 0;
    while done < states {
        let y = Mat3::from_fn(|_, _| rng.gen_range(-0.3..0.3));
        if (y + Mat3::identity()).determinant() <= 0.2 {
            continue;
        }
        done += 1;
        let eps = 1e-5;
        let s = stress(params, &y)?;
        let fd = Mat3::from_fn(|i, j| {
            let e = unit(3 * i + j) * eps;
            let up = energy(params, &(y + e)).expect("admissible");
            let dn = energy(params, &(y - e)).expect("admissible");
            (up - dn) / (2.0 * eps)
        });
        report.stress_vs_energy = report.stress_vs_energy.max((fd - s).norm() / s.norm());

        let (_, t) = stress_and_tangent(params, &y)?;
        let scale = t.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for a in 0..9 {
            let h = unit(a);
            let exact = tangent_apply(params, &y, &h)?;
            let fd = (stress(params, &(y + h * eps))? - stress(params, &(y - h * eps))?) / (2.0 * eps);
            report.tangent_vs_stress = report.tangent_vs_stress.max((fd - exact).norm() / exact.norm());
            for b in 0..9 {
                report.hessian_asymmetry = report.hessian_asymmetry.max((t[a][b] - t[b][a]).abs() / scale);
            }
            let hb = unit((a + 4) % 9);
            let cross = frobenius_dot(&hb, &exact) - frobenius_dot(&h, &tangent_apply(params, &y, &hb)?);
            report.hessian_asymmetry = report.hessian_asymmetry.max(cross.abs() / scale);
        }
    }
    Ok(report)
}

/// Relative gap between `trapezoid(<T'(alpha)h, W>)` and `-h : gamma` for
/// `W = M T'(alpha)h`, the derivative/adjoint identity.
pub fn adjoint_pairing(desk: &Desk, seed: u64) -> Result<f64> {
    let n = desk.disc.knots_per_axis();
    let alpha = DictionaryCoeffs::ones(n);
    let p = desk.problem();
    let u = p.forward(&alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = DMatrix::from_fn(n + 1, n + 1, |_, _| rng.gen_range(-1.0..1.0));
    let v = derivative_apply(&desk.disc, &alpha, &h, &u, &desk.tg, &desk.solver)?;
    let w = FieldHistory::from_levels(v.iter().map(|l| desk.disc.mass.mul_vec(l)).collect())?;
    let adj = adjoint_full(&desk.disc, &alpha, &w, &u, &desk.tg, &desk.solver)?;
    let gamma = gradient(&desk.disc, &u, &adj, &desk.tg)?;
    let lhs = trapezoid_pairing(&v, &w, &desk.tg);
    Ok((lhs + h.dot(&gamma)).abs() / lhs.abs())
}

/// Linearization remainders `||T(alpha+sh) - T(alpha) - T'(alpha)sh||` at
/// `alpha = 1` over the given scales, with `||h||_inf = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorReport {
    pub scales: Vec<f64>,
    pub remainders: Vec<f64>,
    /// Least-squares log-log slope.
    pub slope: f64,
}

pub fn taylor_remainders(desk: &Desk, scales: &[f64], seed: u64) -> Result<TaylorReport> {
    let n = desk.disc.knots_per_axis();
    let alpha = DictionaryCoeffs::ones(n);
    let p = desk.problem();
    let u = p.forward(&alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = DMatrix::from_fn(n + 1, n + 1, |_, _| rng.gen_range(-1.0..1.0));
    h /= h.amax();
    let v = derivative_apply(&desk.disc, &alpha, &h, &u, &desk.tg, &desk.solver)?;
    let mut remainders = Vec::with_capacity(scales.len());
    for &s in scales {
        let ub = p.forward(&DictionaryCoeffs::new(alpha.as_matrix() + &h * s)?)?;
        let d = FieldHistory::from_levels(
            ub.iter()
                .zip(u.iter())
                .zip(v.iter())
                .map(|((b, a), dv)| (0..b.len()).map(|i| (b[i] - a[i]) - s * dv[i]).collect())
                .collect(),
        )?;
        remainders.push(space_time_norm(&desk.disc, &d, &desk.tg)?);
    }
    Ok(TaylorReport {
        slope: loglog_slope(scales, &remainders),
        scales: scales.to_vec(),
        remainders,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Cone ratios for `count` random perturbations `alpha = 1 + h` with
/// `|h_ij| <= max_norm`.
pub fn cone_ratios(desk: &Desk, count: usize, max_norm: f64, seed: u64) -> Result<Vec<f64>> {
    let n = desk.disc.knots_per_axis();
    let ones = DictionaryCoeffs::ones(n);
    let p = desk.problem();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let h = DMatrix::from_fn(n + 1, n + 1, |_, _| rng.gen_range(-max_norm..max_norm));
            p.cone_ratio(&ones, &DictionaryCoeffs::new(ones.as_matrix() + h)?)
        })
        .collect()
}

/// Runs one suite and returns its table; `All` concatenates the others.
pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    if matches!(suite, Suite::Material | Suite::All) {
        let r = material_fd(&NeoHookeanParams::plate(), 100, 1)?;
        checks.push(Check::at_most("material: stress vs FD energy", r.stress_vs_energy, 1e-6));
        checks.push(Check::at_most("material: tangent vs FD stress", r.tangent_vs_stress, 1e-6));
        checks.push(Check::at_most("material: Hessian symmetry", r.hessian_asymmetry, 1e-12));
    }
    if matches!(suite, Suite::Adjoint | Suite::All) {
        let e16 = adjoint_pairing(&Desk::new(16)?, 3)?;
        let e32 = adjoint_pairing(&Desk::new(32)?, 3)?;
        checks.push(Check::at_most("adjoint: pairing gap, m = 16", e16, 1e-2));
        checks.push(Check::at_most("adjoint: pairing gap, m = 32", e32, 5e-3));
    }
    if matches!(suite, Suite::Taylor | Suite::All) {
        let r = taylor_remainders(&Desk::new(16)?, &TAYLOR_SCALES, 5)?;
        checks.push(Check::within("taylor: remainder slope over 4 decades", r.slope, 1.4, 2.1));
    }
    if matches!(suite, Suite::Cone | Suite::All) {
        let ratios = cone_ratios(&Desk::new(16)?, 10, 0.1, 7)?;
        let worst = ratios.iter().copied().fold(0.0, f64::max);
        checks.push(Check::below("cone: worst ratio, 10 draws, |h| <= 0.1", worst, 0.5));
    }
    Ok(checks)
}

/// `||h||_inf` values spanning four decades.
pub const TAYLOR_SCALES: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn material_fd_is_accurate() {
        let r = material_fd(&NeoHookeanParams::plate(), 100, 11).unwrap();
        assert!(r.stress_vs_energy <= 1e-6, "{r:?}");
        assert!(r.tangent_vs_stress <= 1e-6, "{r:?}");
        assert!(r.hessian_asymmetry <= 1e-12, "{r:?}");
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let x = [1.0, 0.1, 0.01];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("cone".parse::<Suite>().unwrap(), Suite::Cone);
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn check_lines_report_status() {
        let c = Check::at_most("x", 2.0, 1.0);
        assert!(!c.passed);
        assert!(c.to_string().starts_with("FAIL"));
        assert!(Check::within("y", 1.5, 1.4, 2.1).passed);
    }
}
