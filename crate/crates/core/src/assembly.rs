//! State-dependent tangent matrix, internal force vector and dictionary
//! gradient integrals.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, QpLocation, Result};
use crate::material::{
    self, frobenius_dot, DictionaryCoeffs, Mat3, NeoHookeanParams, SplineGrid, Tangent9,
};
use crate::mesh::{PlateMesh, QuadraturePoint};
use crate::sparse::SparseMatrix;

/// Mesh, material and dictionary basis, with the mass matrix and the
/// per-quadrature-point hat products precomputed.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: PlateMesh,
    pub material: NeoHookeanParams,
    pub grid2: SplineGrid,
    pub grid3: SplineGrid,
    pub mass: SparseMatrix,
    /// For layer quadrature points: the four `(r, s, b_r(x2) b_s(x3))` products.
    hats: Vec<Option<[(usize, usize, f64); 4]>>,
}

/// Spatial weighting of the constitutive law at a quadrature point.
#[derive(Debug, Clone, Copy)]
pub enum Weighting<'a> {
    /// Dictionary coefficients: `sum alpha_rs b_r b_s` in layers, 1 elsewhere.
    Coeffs(&'a DictionaryCoeffs),
    /// A coefficient direction: `sum h_rs b_r b_s` in layers, 0 elsewhere.
    Direction(&'a DMatrix<f64>),
}

impl Discretization {
    pub fn new(mesh: PlateMesh, material: NeoHookeanParams, knots_per_axis: usize) -> Result<Self> {
        let grid2 = SplineGrid::new(mesh.extents[1].0, mesh.extents[1].1, knots_per_axis)?;
        let grid3 = SplineGrid::new(mesh.extents[2].0, mesh.extents[2].1, knots_per_axis)?;
        let mass = mesh.assemble_mass();
        let hats = mesh
            .quadrature()
            .iter()
            .map(|qp| {
                if !mesh.layer_flags[qp.element] {
                    return None;
                }
                let a2 = grid2.active(qp.x[1]);
                let a3 = grid3.active(qp.x[2]);
                Some([
                    (a2[0].0, a3[0].0, a2[0].1 * a3[0].1),
                    (a2[0].0, a3[1].0, a2[0].1 * a3[1].1),
                    (a2[1].0, a3[0].0, a2[1].1 * a3[0].1),
                    (a2[1].0, a3[1].0, a2[1].1 * a3[1].1),
                ])
            })
            .collect();
        Ok(Self {
            mesh,
            material,
            grid2,
            grid3,
            mass,
            hats,
        })
    }

    /// Number of knot intervals per axis; coefficients are `(n+1) x (n+1)`.
    pub fn knots_per_axis(&self) -> usize {
        self.grid2.n
    }

    pub fn dof_count(&self) -> usize {
        self.mesh.dof_count()
    }

    fn check_coeff_shape(&self, m: &DMatrix<f64>) -> Result<()> {
        let n = self.grid2.n + 1;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                found: m.nrows() * m.ncols(),
            });
        }
        Ok(())
    }

    fn weight(&self, q: usize, weighting: Weighting<'_>) -> f64 {
        match (self.hats[q], weighting) {
            (None, Weighting::Coeffs(_)) => 1.0,
            (None, Weighting::Direction(_)) => 0.0,
            (Some(h), Weighting::Coeffs(a)) => weighted_sum(&h, a.as_matrix()),
            (Some(h), Weighting::Direction(d)) => weighted_sum(&h, d),
        }
    }

    fn check_state(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dof_count() {
            return Err(Error::LengthMismatch {
                expected: self.dof_count(),
                found: u.len(),
            });
        }
        Ok(())
    }

    fn blended_gradient(&self, qp: &QuadraturePoint, ua: &[f64], ub: &[f64], theta: f64) -> Mat3 {
        if theta == 1.0 {
            self.mesh.eval_gradient(ua, qp)
        } else if theta == 0.0 {
            self.mesh.eval_gradient(ub, qp)
        } else {
            theta * self.mesh.eval_gradient(ua, qp) + (1.0 - theta) * self.mesh.eval_gradient(ub, qp)
        }
    }

    fn locate(&self, q: usize, qp: &QuadraturePoint, err: Error) -> Error {
        match err {
            Error::NonPositiveJacobian { det, .. } => Error::NonPositiveJacobian {
                det,
                location: Some(QpLocation {
                    element: qp.element,
                    point: q % 8,
                    x: qp.x,
                }),
            },
            other => other,
        }
    }

    fn assemble(
        &self,
        weighting: Weighting<'_>,
        ua: &[f64],
        ub: &[f64],
        theta: f64,
        want_force: bool,
        want_tangent: bool,
    ) -> Result<(Option<Vec<f64>>, Option<SparseMatrix>)> {
        self.check_state(ua)?;
        self.check_state(ub)?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, 1]")));
        }
        match weighting {
            Weighting::Coeffs(a) => self.check_coeff_shape(a.as_matrix())?,
            Weighting::Direction(d) => self.check_coeff_shape(d)?,
        }
        let mesh = &self.mesh;
        let mut force = want_force.then(|| vec![0.0; self.dof_count()]);
        let mut tangent = want_tangent.then(|| SparseMatrix::zeros(Arc::clone(mesh.pattern()), true));
        let mut local = [[0.0; 24]; 24];
        for e in 0..mesh.element_count() {
            let mut touched = false;
            for row in local.iter_mut() {
                row.fill(0.0);
            }
            for (k, qp) in mesh.element_quadrature(e).iter().enumerate() {
                let q = 8 * e + k;
                let w = self.weight(q, weighting);
                if w == 0.0 {
                    continue;
                }
                let y = self.blended_gradient(qp, ua, ub, theta);
                let wq = w * qp.weight;
                if want_tangent {
                    let (s, t) = material::stress_and_tangent(&self.material, &y)
                        .map_err(|err| self.locate(q, qp, err))?;
                    if let Some(f) = force.as_mut() {
                        scatter_force(mesh, qp, &s, wq, f);
                    }
                    add_tangent(qp, &t, wq, &mut local);
                    touched = true;
                } else if let Some(f) = force.as_mut() {
                    let s = material::stress(&self.material, &y).map_err(|err| self.locate(q, qp, err))?;
                    scatter_force(mesh, qp, &s, wq, f);
                }
            }
            if let (Some(a), true) = (tangent.as_mut(), touched) {
                mesh.scatter_element_matrix(e, &local, a.values_mut());
            }
        }
        Ok((force, tangent))
    }

    /// `A_rs = int w(x) (d^2C(theta Ju_a + (1-theta) Ju_b) : J phi_r) : J phi_s dx`
    pub fn assemble_tangent(
        &self,
        alpha: &DictionaryCoeffs,
        ua: &[f64],
        ub: &[f64],
        theta: f64,
    ) -> Result<SparseMatrix> {
        let (_, a) = self.assemble(Weighting::Coeffs(alpha), ua, ub, theta, false, true)?;
        Ok(a.expect("requested"))
    }

    /// `D_s = int w(x) dC(theta Ju_a + (1-theta) Ju_b) : J phi_s dx`
    pub fn assemble_internal_force(
        &self,
        alpha: &DictionaryCoeffs,
        ua: &[f64],
        ub: &[f64],
        theta: f64,
    ) -> Result<Vec<f64>> {
        self.assemble_weighted_force(Weighting::Coeffs(alpha), ua, ub, theta)
    }

    pub fn assemble_weighted_force(
        &self,
        weighting: Weighting<'_>,
        ua: &[f64],
        ub: &[f64],
        theta: f64,
    ) -> Result<Vec<f64>> {
        let (d, _) = self.assemble(weighting, ua, ub, theta, true, false)?;
        Ok(d.expect("requested"))
    }

    /// Internal force and tangent from one pass over the quadrature points.
    pub fn assemble_force_and_tangent(
        &self,
        alpha: &DictionaryCoeffs,
        ua: &[f64],
        ub: &[f64],
        theta: f64,
    ) -> Result<(Vec<f64>, SparseMatrix)> {
        let (d, a) = self.assemble(Weighting::Coeffs(alpha), ua, ub, theta, true, true)?;
        Ok((d.expect("requested"), a.expect("requested")))
    }

    /// Total stored energy `int w(x) C(theta Ju_a + (1-theta) Ju_b) dx`.
    pub fn stored_energy(&self, alpha: &DictionaryCoeffs, ua: &[f64], ub: &[f64], theta: f64) -> Result<f64> {
        self.check_state(ua)?;
        self.check_state(ub)?;
        let mut total = 0.0;
        for (q, qp) in self.mesh.quadrature().iter().enumerate() {
            let w = self.weight(q, Weighting::Coeffs(alpha));
            let y = self.blended_gradient(qp, ua, ub, theta);
            let c = material::energy(&self.material, &y).map_err(|err| self.locate(q, qp, err))?;
            total += w * qp.weight * c;
        }
        Ok(total)
    }

    /// All dictionary gradient integrals at one time level:
    /// `z_rs = int_layers b_r(x2) b_s(x3) dC(Ju) : Jp dx`.
    pub fn gradient_entries(&self, u: &[f64], p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_state(u)?;
        self.check_state(p)?;
        let n = self.grid2.n + 1;
        let mut z = DMatrix::zeros(n, n);
        for (q, qp) in self.mesh.quadrature().iter().enumerate() {
            let Some(hats) = self.hats[q] else { continue };
            let jp = self.mesh.eval_gradient(p, qp);
            if jp.iter().all(|&v| v == 0.0) {
                continue;
            }
            let ju = self.mesh.eval_gradient(u, qp);
            let s = material::stress(&self.material, &ju).map_err(|err| self.locate(q, qp, err))?;
            let integrand = qp.weight * frobenius_dot(&s, &jp);
            for (r, c, b) in hats {
                z[(r, c)] += b * integrand;
            }
        }
        Ok(z)
    }

    /// Single `(r, s)` entry of [`Self::gradient_entries`].
    pub fn gradient_entry(&self, r: usize, s: usize, u: &[f64], p: &[f64]) -> Result<f64> {
        self.check_state(u)?;
        self.check_state(p)?;
        let mut z = 0.0;
        for (q, qp) in self.mesh.quadrature().iter().enumerate() {
            if self.hats[q].is_none() {
                continue;
            }
            let b = self.grid2.eval(r, qp.x[1]) * self.grid3.eval(s, qp.x[2]);
            if b == 0.0 {
                continue;
            }
            let ju = self.mesh.eval_gradient(u, qp);
            let jp = self.mesh.eval_gradient(p, qp);
            let st = material::stress(&self.material, &ju).map_err(|err| self.locate(q, qp, err))?;
            z += b * qp.weight * frobenius_dot(&st, &jp);
        }
        Ok(z)
    }

    pub fn is_layer_point(&self, q: usize) -> bool {
        self.hats[q].is_some()
    }
}

fn weighted_sum(h: &[(usize, usize, f64); 4], c: &DMatrix<f64>) -> f64 {
    h.iter().map(|&(r, s, b)| c[(r, s)] * b).sum()
}

fn scatter_force(mesh: &PlateMesh, qp: &QuadraturePoint, s: &Mat3, wq: f64, f: &mut [f64]) {
    let conn = &mesh.elements[qp.element];
    for a in 0..8 {
        let g = qp.grad[a];
        for i in 0..3 {
            f[3 * conn[a] + i] += wq * (s[(i, 0)] * g[0] + s[(i, 1)] * g[1] + s[(i, 2)] * g[2]);
        }
    }
}

fn add_tangent(qp: &QuadraturePoint, t: &Tangent9, wq: f64, local: &mut [[f64; 24]; 24]) {
    // c[a][i][k][l] = sum_j T_{ij,kl} dN_a/dx_j
    let mut c = [[[[0.0; 3]; 3]; 3]; 8];
    for a in 0..8 {
        let g = qp.grad[a];
        for i in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    c[a][i][k][l] = t[3 * i][3 * k + l] * g[0]
                        + t[3 * i + 1][3 * k + l] * g[1]
                        + t[3 * i + 2][3 * k + l] * g[2];
                }
            }
        }
    }
    for a in 0..8 {
        for i in 0..3 {
            let row = &mut local[3 * a + i];
            for b in 0..8 {
                let g = qp.grad[b];
                for k in 0..3 {
                    let v = &c[a][i][k];
                    row[3 * b + k] += wq * (v[0] * g[0] + v[1] * g[1] + v[2] * g[2]);
                }
            }
        }
    }
}
