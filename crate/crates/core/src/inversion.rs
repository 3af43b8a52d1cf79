//! Attenuated Landweber iterations on the dictionary coefficients, with
//! noise injection and discrepancy-principle stopping.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::forward::{forward, FieldHistory, SolverConfig, TimeGrid};
use crate::material::DictionaryCoeffs;
use crate::observation::SensorArray;
use crate::sensitivity::{adjoint_full, derivative_apply, gradient, space_time_norm};
use crate::sparse::{dot, SparseMatrix};

/// `(T/m) (v_0/2 + v_1 + ... + v_{m-1} + v_m/2)`.
pub fn trapezoid_time_integral(values: &[f64], tg: &TimeGrid) -> Result<f64> {
    if values.len() != tg.levels() {
        return Err(Error::LengthMismatch {
            expected: tg.levels(),
            found: values.len(),
        });
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(j, v)| tg.trapezoid_weight(j) * v)
        .sum())
}

/// `sqrt(trapezoid(x^j . G x^j))`, with `G = I` when `gram` is `None`.
pub fn history_norm(data: &[Vec<f64>], tg: &TimeGrid, gram: Option<&SparseMatrix>) -> Result<f64> {
    let sq: Vec<f64> = data
        .iter()
        .map(|x| match gram {
            Some(g) => dot(x, &g.mul_vec(x)),
            None => dot(x, x),
        })
        .collect();
    Ok(trapezoid_time_integral(&sq, tg)?.sqrt())
}

/// Adds seeded i.i.d. Gaussian noise rescaled so that
/// `||noisy - data|| = delta ||data||` in the Euclidean [`history_norm`].
pub fn add_noise(data: &[Vec<f64>], tg: &TimeGrid, delta: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("noise level {delta} must be >= 0")));
    }
    if delta == 0.0 {
        return Ok(data.to_vec());
    }
    let signal = history_norm(data, tg, None)?;
    if signal == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Vec<f64>> = data
        .iter()
        .map(|l| l.iter().map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let scale = delta * signal / history_norm(&noise, tg, None)?;
    Ok(data
        .iter()
        .zip(&noise)
        .map(|(d, e)| d.iter().zip(e).map(|(x, n)| x + scale * n).collect())
        .collect())
}

/// `||noisy - clean||` in [`history_norm`] with the given Gram matrix.
pub fn noise_level(noisy: &[Vec<f64>], clean: &[Vec<f64>], tg: &TimeGrid, gram: Option<&SparseMatrix>) -> Result<f64> {
    if noisy.len() != clean.len() {
        return Err(Error::LengthMismatch {
            expected: clean.len(),
            found: noisy.len(),
        });
    }
    let diff: Vec<Vec<f64>> = noisy
        .iter()
        .zip(clean)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    history_norm(&diff, tg, gram)
}

/// True iff `residual_norm <= tau * delta`; requires `tau > 2`.
pub fn discrepancy_stop(residual_norm: f64, delta: f64, tau: f64) -> Result<bool> {
    if !(tau > 2.0) {
        return Err(Error::InvalidTau(tau));
    }
    Ok(residual_norm <= tau * delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandweberConfig {
    pub omega: f64,
    pub max_iter: usize,
    /// Stop once the squared residual `delta_i` drops to this value.
    pub tol: f64,
    /// Discrepancy parameter; `None` disables discrepancy stopping.
    pub tau: Option<f64>,
    /// Relative noise level injected into synthetic data.
    pub noise_delta: f64,
    pub seed: u64,
    pub project_nonneg: bool,
}

impl Default for LandweberConfig {
    fn default() -> Self {
        Self {
            omega: 10.0,
            max_iter: 50,
            tol: 1e-12,
            tau: None,
            noise_delta: 0.0,
            seed: 0,
            project_nonneg: true,
        }
    }
}

impl LandweberConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega = {} must be positive", self.omega)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {} must be >= 0", self.tol)));
        }
        if let Some(tau) = self.tau {
            if !(tau > 2.0) {
                return Err(Error::InvalidTau(tau));
            }
        }
        if !(self.noise_delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise_delta = {} must be >= 0",
                self.noise_delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Maxiter,
    Tolerance,
    Discrepancy,
}

/// Iteration trace; contains no timings so repeated runs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Squared residual `delta_i` at each iterate before its update.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub omega: f64,
    /// Absolute noise level used by the discrepancy test.
    pub noise_norm: f64,
    /// Final coefficients, row by row.
    pub alpha: Vec<Vec<f64>>,
}

/// Measured data and how the forward field is compared with it.
#[derive(Debug, Clone, Copy)]
pub enum DataTerm<'a> {
    /// Full displacement history, compared in the mass-weighted norm.
    Full(&'a FieldHistory),
    /// Sensor series, compared in the Euclidean sensor norm.
    Sensor {
        sensors: &'a SensorArray,
        y: &'a [Vec<f64>],
    },
}

/// Forward field at one iterate together with its residual.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub u: FieldHistory,
    /// Residual load vectors fed to the adjoint solver.
    pub w: FieldHistory,
    /// `trapezoid(||w^j||^2)` in the data norm.
    pub delta: f64,
}

/// Everything fixed across Landweber iterations.
#[derive(Debug, Clone, Copy)]
pub struct InverseProblem<'a> {
    pub disc: &'a Discretization,
    pub tg: TimeGrid,
    pub force: &'a FieldHistory,
    pub solver: SolverConfig,
}

impl InverseProblem<'_> {
    pub fn forward(&self, alpha: &DictionaryCoeffs) -> Result<FieldHistory> {
        Ok(forward(self.disc, alpha, &self.tg, self.force, &self.solver)?.u)
    }

    pub fn evaluate(&self, alpha: &DictionaryCoeffs, data: DataTerm<'_>) -> Result<Evaluation> {
        let u = self.forward(alpha)?;
        let levels = self.tg.levels();
        let (w, sq) = match data {
            DataTerm::Full(ud) => {
                ud.check(&self.tg, self.disc.dof_count())?;
                let e = u.difference(ud)?;
                let w: Vec<Vec<f64>> = e.iter().map(|l| self.disc.mass.mul_vec(l)).collect();
                let sq: Vec<f64> = e.iter().zip(&w).map(|(a, b)| dot(a, b)).collect();
                (FieldHistory::from_levels(w)?, sq)
            }
            DataTerm::Sensor { sensors, y } => {
                if y.len() != levels {
                    return Err(Error::LengthMismatch {
                        expected: levels,
                        found: y.len(),
                    });
                }
                let mut sq = Vec::with_capacity(levels);
                let mut ws = Vec::with_capacity(levels);
                for (j, yj) in y.iter().enumerate() {
                    if yj.len() != sensors.len() {
                        return Err(Error::LengthMismatch {
                            expected: sensors.len(),
                            found: yj.len(),
                        });
                    }
                    let r: Vec<f64> = sensors.observe(u.level(j)).iter().zip(yj).map(|(a, b)| a - b).collect();
                    sq.push(dot(&r, &r));
                    ws.push(r);
                }
                (sensors.adjoint_history(&ws)?, sq)
            }
        };
        let delta = trapezoid_time_integral(&sq, &self.tg)?;
        Ok(Evaluation { u, w, delta })
    }

    /// `gamma`, the Landweber direction: minus the gradient of `delta / 2`.
    pub fn direction(&self, alpha: &DictionaryCoeffs, eval: &Evaluation) -> Result<DMatrix<f64>> {
        let p = adjoint_full(self.disc, alpha, &eval.w, &eval.u, &self.tg, &self.solver)?;
        gradient(self.disc, &eval.u, &p, &self.tg)
    }

    /// `||d|| / ||T(alpha_bar) - T(alpha)||` with
    /// `d = T(alpha_bar) - T(alpha) - T'(alpha)(alpha_bar - alpha)` in the
    /// discrete `L2(0,T;U) + H1(0,T;H)` norm.
    pub fn cone_ratio(&self, alpha: &DictionaryCoeffs, alpha_bar: &DictionaryCoeffs) -> Result<f64> {
        let u = self.forward(alpha)?;
        let ub = self.forward(alpha_bar)?;
        let diff = ub.difference(&u)?;
        let den = space_time_norm(self.disc, &diff, &self.tg)?;
        if den < 1e-14 {
            return Err(Error::DegenerateDenominator(den));
        }
        let h = alpha_bar.as_matrix() - alpha.as_matrix();
        let v = derivative_apply(self.disc, alpha, &h, &u, &self.tg, &self.solver)?;
        let num = space_time_norm(self.disc, &diff.difference(&v)?, &self.tg)?;
        Ok(num / den)
    }

    /// Runs Landweber from `alpha = 1`. `noise_norm` is the absolute data
    /// noise level for the discrepancy test.
    pub fn landweber(
        &self,
        data: DataTerm<'_>,
        noise_norm: f64,
        cfg: &LandweberConfig,
    ) -> Result<(DictionaryCoeffs, RunRecord)> {
        cfg.validate()?;
        let n = self.disc.knots_per_axis();
        let mut alpha = DictionaryCoeffs::ones(n);
        let mut residuals = Vec::new();
        let mut stop_reason = StopReason::Maxiter;
        for i in 0..cfg.max_iter {
            let tag = |source: Error| Error::Iteration {
                iteration: i + 1,
                source: Box::new(source),
            };
            let eval = self.evaluate(&alpha, data).map_err(tag)?;
            residuals.push(eval.delta);
            if eval.delta <= cfg.tol {
                stop_reason = StopReason::Tolerance;
                break;
            }
            if let Some(tau) = cfg.tau {
                if discrepancy_stop(eval.delta.sqrt(), noise_norm, tau)? {
                    stop_reason = StopReason::Discrepancy;
                    break;
                }
            }
            let gamma = self.direction(&alpha, &eval).map_err(tag)?;
            let mut next = alpha.as_matrix() + gamma * cfg.omega;
            if cfg.project_nonneg {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            alpha = DictionaryCoeffs::new(next).map_err(tag)?;
        }
        let record = RunRecord {
            iterations: residuals.len(),
            residuals,
            stop_reason,
            omega: cfg.omega,
            noise_norm,
            alpha: rows(alpha.as_matrix()),
        };
        Ok((alpha, record))
    }

    /// Halving protocol: the first `omega` in `omega0, omega0/2, ...,
    /// omega0/2^8` whose first `probe_iter` residuals do not increase.
    pub fn calibrate_omega(
        &self,
        data: DataTerm<'_>,
        omega0: f64,
        probe_iter: usize,
        project_nonneg: bool,
    ) -> Result<Option<f64>> {
        let start = DictionaryCoeffs::ones(self.disc.knots_per_axis());
        let first = self.evaluate(&start, data)?;
        let gamma0 = self.direction(&start, &first)?;
        'omega: for k in 0..=8 {
            let omega = omega0 / f64::from(1u32 << k);
            let mut prev = first.delta;
            let mut alpha = start.clone();
            let mut gamma = gamma0.clone();
            for i in 0..probe_iter {
                let mut next = alpha.as_matrix() + &gamma * omega;
                if project_nonneg {
                    next.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                let Ok(a) = DictionaryCoeffs::new(next) else { continue 'omega };
                alpha = a;
                let eval = match self.evaluate(&alpha, data) {
                    Ok(e) => e,
                    Err(Error::NewtonDiverged { .. } | Error::NonPositiveJacobian { .. }) => continue 'omega,
                    Err(e) => return Err(e),
                };
                if eval.delta > prev {
                    continue 'omega;
                }
                prev = eval.delta;
                if i + 1 < probe_iter {
                    gamma = self.direction(&alpha, &eval)?;
                }
            }
            return Ok(Some(omega));
        }
        Ok(None)
    }
}

/// Landweber on boundary sensor data.
pub fn landweber_sensor(
    problem: &InverseProblem<'_>,
    sensors: &SensorArray,
    y: &[Vec<f64>],
    noise_norm: f64,
    cfg: &LandweberConfig,
) -> Result<(DictionaryCoeffs, RunRecord)> {
    problem.landweber(DataTerm::Sensor { sensors, y }, noise_norm, cfg)
}

/// Landweber on the full displacement history.
pub fn landweber_full(
    problem: &InverseProblem<'_>,
    u_data: &FieldHistory,
    noise_norm: f64,
    cfg: &LandweberConfig,
) -> Result<(DictionaryCoeffs, RunRecord)> {
    problem.landweber(DataTerm::Full(u_data), noise_norm, cfg)
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
