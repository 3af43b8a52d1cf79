//! Theta-method time stepping of the split wave system with a Newton
//! iteration per step.

use serde::{Deserialize, Serialize};

use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::material::DictionaryCoeffs;
use crate::sparse::{cg_solve, norm, CgConfig, SparseMatrix};

/// `m` equal steps of length `k = T / m` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub theta: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize, theta: f64) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time grid needs T > 0 and m >= 1, got T = {horizon}, m = {steps}"
            )));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, 1]")));
        }
        Ok(Self {
            horizon,
            steps,
            theta,
        })
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            j as f64 * self.step()
        }
    }

    /// Composite trapezoid weights `k/2, k, ..., k, k/2`.
    pub fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.steps {
            0.5 * self.step()
        } else {
            self.step()
        }
    }
}

/// Nodal vectors at time levels `j = 0..=m`, all of one length.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    levels: Vec<Vec<f64>>,
}

impl FieldHistory {
    pub fn zeros(levels: usize, len: usize) -> Self {
        Self {
            levels: vec![vec![0.0; len]; levels],
        }
    }

    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = levels.first() {
            let len = first.len();
            if let Some(bad) = levels.iter().find(|l| l.len() != len) {
                return Err(Error::LengthMismatch {
                    expected: len,
                    found: bad.len(),
                });
            }
        }
        Ok(Self { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Length of each level.
    pub fn dim(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.levels[j]
    }

    pub fn level_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.levels[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.levels.iter().map(Vec::as_slice)
    }

    pub fn into_levels(self) -> Vec<Vec<f64>> {
        self.levels
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|x| c * x).collect())
                .collect(),
        }
    }

    /// `self - other`, level by level.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() || self.dim() != other.dim() {
            return Err(Error::LengthMismatch {
                expected: self.len() * self.dim(),
                found: other.len() * other.dim(),
            });
        }
        Ok(Self {
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        })
    }

    pub(crate) fn check(&self, tg: &TimeGrid, dim: usize) -> Result<()> {
        if self.len() != tg.levels() {
            return Err(Error::LengthMismatch {
                expected: tg.levels(),
                found: self.len(),
            });
        }
        if self.dim() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// No constraint elimination; sensors see the free surface.
    #[default]
    Free,
    /// Homogeneous Dirichlet data on every boundary node.
    ClampedAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub density: f64,
    /// Newton stops once `||F_h|| <= newton_tol * (1 + ||MF^j||)`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub cg: CgConfig,
    pub boundary: BoundaryMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            density: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 20,
            cg: CgConfig::default(),
            boundary: BoundaryMode::Free,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) || !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "solver config needs rho > 0, newton_tol > 0, newton_max_iter >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    /// Displacements `U^j`.
    pub u: FieldHistory,
    /// Mass-weighted velocities `MR^j`.
    pub mr: FieldHistory,
    /// Residual norms `||F_h(U^{j,l})||`, starting with the initial guess; index 0 is empty.
    pub newton_residuals: Vec<Vec<f64>>,
}

impl ForwardSolution {
    /// Newton updates taken at each step.
    pub fn newton_iterations(&self) -> Vec<usize> {
        self.newton_residuals
            .iter()
            .map(|r| r.len().saturating_sub(1))
            .collect()
    }
}

/// Dirichlet mask for `mode`, or `None` when nothing is constrained.
pub(crate) fn fixed_dofs(disc: &Discretization, mode: BoundaryMode) -> Option<Vec<bool>> {
    match mode {
        BoundaryMode::Free => None,
        BoundaryMode::ClampedAll => Some(disc.mesh.boundary_dofs()),
    }
}

pub(crate) fn zero_fixed(v: &mut [f64], fixed: Option<&[bool]>) {
    if let Some(fixed) = fixed {
        for (x, &f) in v.iter_mut().zip(fixed) {
            if f {
                *x = 0.0;
            }
        }
    }
}

/// `M + c A`, with fixed dofs replaced by identity rows.
pub(crate) fn shifted(mass: &SparseMatrix, a: &SparseMatrix, c: f64, fixed: Option<&[bool]>) -> SparseMatrix {
    let mut s = mass.linear_combination(1.0, a, c);
    if let Some(fixed) = fixed {
        s.constrain(fixed);
    }
    s
}

/// Solves the nonlinear wave equation for the mass-weighted loads `MF^j`,
/// starting from rest.
pub fn forward(
    disc: &Discretization,
    alpha: &DictionaryCoeffs,
    tg: &TimeGrid,
    force: &FieldHistory,
    cfg: &SolverConfig,
) -> Result<ForwardSolution> {
    cfg.validate()?;
    let n = disc.dof_count();
    force.check(tg, n)?;
    let fixed = fixed_dofs(disc, cfg.boundary);
    let fixed = fixed.as_deref();
    let k = tg.step();
    let theta = tg.theta;
    let c = k * k * theta / cfg.density;
    let mass = &disc.mass;

    let mut u = FieldHistory::zeros(tg.levels(), n);
    let mut mr = FieldHistory::zeros(tg.levels(), n);
    let mut newton_residuals = vec![Vec::new()];

    for j in 1..=tg.steps {
        let u_prev = u.level(j - 1).to_vec();
        let mr_prev = mr.level(j - 1);
        let mf_now = force.level(j);
        let mf_prev = force.level(j - 1);
        // Everything in F_h that does not depend on U^j.
        let m_uprev = mass.mul_vec(&u_prev);
        let constant: Vec<f64> = (0..n)
            .map(|i| {
                -m_uprev[i] - k * mr_prev[i] - c * theta * mf_now[i] - c * (1.0 - theta) * mf_prev[i]
            })
            .collect();
        let tol = cfg.newton_tol * (1.0 + norm(mf_now));

        let mut uj = u_prev.clone();
        let mut history = Vec::new();
        let mut iteration = 0;
        let d_final = loop {
            let (d, a) = disc.assemble_force_and_tangent(alpha, &uj, &u_prev, theta)?;
            let mu = mass.mul_vec(&uj);
            let mut residual: Vec<f64> = (0..n).map(|i| mu[i] + constant[i] + c * d[i]).collect();
            zero_fixed(&mut residual, fixed);
            let rnorm = norm(&residual);
            history.push(rnorm);
            if !rnorm.is_finite() {
                return Err(Error::NewtonDiverged {
                    step: j,
                    iteration,
                    residual: rnorm,
                });
            }
            if rnorm <= tol {
                break d;
            }
            if iteration == cfg.newton_max_iter {
                return Err(Error::NewtonDiverged {
                    step: j,
                    iteration,
                    residual: rnorm,
                });
            }
            let jac = shifted(mass, &a, c * theta, fixed);
            for r in residual.iter_mut() {
                *r = -*r;
            }
            let delta = cg_solve(&jac, &residual, &vec![0.0; n], &cfg.cg)?;
            for (x, dx) in uj.iter_mut().zip(&delta.x) {
                *x += dx;
            }
            iteration += 1;
        };

        let kr = k / cfg.density;
        let mr_next: Vec<f64> = (0..n)
            .map(|i| {
                mr_prev[i] - kr * d_final[i] + kr * theta * mf_now[i] + kr * (1.0 - theta) * mf_prev[i]
            })
            .collect();
        mr.level_mut(j).copy_from_slice(&mr_next);
        zero_fixed(mr.level_mut(j), fixed);
        u.level_mut(j).copy_from_slice(&uj);
        newton_residuals.push(history);
    }

    Ok(ForwardSolution {
        u,
        mr,
        newton_residuals,
    })
}
