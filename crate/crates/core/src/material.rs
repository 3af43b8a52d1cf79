//! Neo-Hookean stored energy, its derivatives in the displacement gradient,
//! and the B-spline dictionary that weights it in space.
//!
//! All derivatives are taken with respect to the displacement gradient
//! `Y = Ju`; the deformation gradient is `F = Y + I`.

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;

/// Flattened fourth-order tangent, `t[3i+j][3k+l] = d^2 C / dY_ij dY_kl`.
pub type Tangent9 = [[f64; 9]; 9];

/// Frobenius inner product `<<A, B>> = tr(A^T B)`.
#[inline]
pub fn frobenius_dot(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NeoHookeanParams {
    pub bulk_modulus: f64,
    pub shear_modulus: f64,
    c1: f64,
    beta: f64,
}

impl NeoHookeanParams {
    pub fn new(bulk_modulus: f64, shear_modulus: f64) -> Result<Self> {
        if !(shear_modulus > 0.0) || !bulk_modulus.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "shear modulus must be positive, got {shear_modulus}"
            )));
        }
        if !(3.0 * bulk_modulus > 2.0 * shear_modulus) {
            return Err(Error::InvalidParameter(format!(
                "need 3K > 2mu, got K = {bulk_modulus}, mu = {shear_modulus}"
            )));
        }
        Ok(Self {
            bulk_modulus,
            shear_modulus,
            c1: 0.5 * shear_modulus,
            beta: (3.0 * bulk_modulus - 2.0 * shear_modulus) / (6.0 * shear_modulus),
        })
    }

    /// Builds the parameters from `c1 = mu/2` and `beta` directly.
    pub fn from_c1_beta(c1: f64, beta: f64) -> Result<Self> {
        if !(c1 > 0.0 && beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c1 and beta must be positive, got c1 = {c1}, beta = {beta}"
            )));
        }
        let mu = 2.0 * c1;
        let k = (6.0 * mu * beta + 2.0 * mu) / 3.0;
        Ok(Self {
            bulk_modulus: k,
            shear_modulus: mu,
            c1,
            beta,
        })
    }

    /// Default plate material: K = 68.6, mu = 26.32.
    pub fn plate() -> Self {
        Self::new(68.6, 26.32).expect("valid constants")
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Quantities shared by energy, stress and tangent at one state.
struct Kinematics {
    f: Mat3,
    /// `F^{-T}`
    g: Mat3,
    /// `D^{-2 beta}`
    d_pow: f64,
    det: f64,
}

fn kinematics(params: &NeoHookeanParams, y: &Mat3) -> Result<Kinematics> {
    let f = y + Mat3::identity();
    let det = f.determinant();
    if !(det > 0.0) {
        return Err(Error::NonPositiveJacobian {
            det,
            location: None,
        });
    }
    let inv = f.try_inverse().ok_or(Error::NonPositiveJacobian {
        det,
        location: None,
    })?;
    Ok(Kinematics {
        f,
        g: inv.transpose(),
        d_pow: (-2.0 * params.beta * det.ln()).exp(),
        det,
    })
}

/// `C(Y) = c1 (I1 - 3) + c1/beta (D^{-2 beta} - 1)`.
pub fn energy(params: &NeoHookeanParams, y: &Mat3) -> Result<f64> {
    let k = kinematics(params, y)?;
    let i1 = k.f.norm_squared();
    debug_assert!(k.det > 0.0);
    Ok(params.c1 * (i1 - 3.0) + params.c1 / params.beta * (k.d_pow - 1.0))
}

/// First Piola-Kirchhoff stress `2 c1 F - 2 c1 D^{-2 beta} F^{-T}`.
pub fn stress(params: &NeoHookeanParams, y: &Mat3) -> Result<Mat3> {
    let k = kinematics(params, y)?;
    Ok(stress_from(params, &k))
}

fn stress_from(params: &NeoHookeanParams, k: &Kinematics) -> Mat3 {
    2.0 * params.c1 * (k.f - k.d_pow * k.g)
}

/// Directional second derivative
/// `2 c1 H + 4 c1 beta D^{-2 beta} G <<G, H>> + 2 c1 D^{-2 beta} G H^T G`
/// with `G = F^{-T}`.
pub fn tangent_apply(params: &NeoHookeanParams, y: &Mat3, h: &Mat3) -> Result<Mat3> {
    let k = kinematics(params, y)?;
    let c1 = params.c1;
    Ok(2.0 * c1 * h
        + (4.0 * c1 * params.beta * k.d_pow * frobenius_dot(&k.g, h)) * k.g
        + (2.0 * c1 * k.d_pow) * (k.g * h.transpose() * k.g))
}

/// Stress and the full flattened tangent at one state; used by assembly.
pub fn stress_and_tangent(params: &NeoHookeanParams, y: &Mat3) -> Result<(Mat3, Tangent9)> {
    let k = kinematics(params, y)?;
    let c1 = params.c1;
    let a = 4.0 * c1 * params.beta * k.d_pow;
    let b = 2.0 * c1 * k.d_pow;
    let g = &k.g;
    let mut t = [[0.0; 9]; 9];
    for i in 0..3 {
        for j in 0..3 {
            let row = &mut t[3 * i + j];
            for kk in 0..3 {
                for l in 0..3 {
                    let mut v = a * g[(i, j)] * g[(kk, l)] + b * g[(i, l)] * g[(kk, j)];
                    if i == kk && j == l {
                        v += 2.0 * c1;
                    }
                    row[3 * kk + l] = v;
                }
            }
        }
    }
    Ok((stress_from(params, &k), t))
}

/// Equidistant knots `a = x_0 < ... < x_n = b` for first-order B-splines.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplineGrid {
    pub a: f64,
    pub b: f64,
    /// Number of cells; there are `n + 1` knots.
    pub n: usize,
}

impl SplineGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || !(b > a) {
            return Err(Error::InvalidParameter(format!(
                "spline grid needs n >= 1 and a < b, got n = {n}, [{a}, {b}]"
            )));
        }
        Ok(Self { a, b, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn knot(&self, i: usize) -> f64 {
        if i == self.n {
            self.b
        } else {
            self.a + i as f64 * self.spacing()
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.knot(i)).collect()
    }

    /// Hat function `b_i(x)`; zero outside `[a, b]`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        if i > self.n || x < self.a || x > self.b {
            return 0.0;
        }
        let t = (x - self.a) / self.spacing() - i as f64;
        (1.0 - t.abs()).max(0.0)
    }

    /// The (at most two) nonzero hat functions at `x` as `(index, value)`.
    pub fn active(&self, x: f64) -> [(usize, f64); 2] {
        if x < self.a || x > self.b {
            return [(0, 0.0), (0, 0.0)];
        }
        let s = (x - self.a) / self.spacing();
        let cell = (s.floor() as usize).min(self.n - 1);
        let t = s - cell as f64;
        [(cell, 1.0 - t), (cell + 1, t)]
    }
}

/// Nonnegative dictionary coefficients `alpha_ij`, `i, j = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryCoeffs(DMatrix<f64>);

impl DictionaryCoeffs {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                let (row, col) = (idx % values.nrows(), idx / values.nrows());
                return Err(Error::InadmissibleCoefficients {
                    row,
                    col,
                    value: *v,
                });
            }
        }
        Ok(Self(values))
    }

    /// All coefficients equal to one: the undamaged plate.
    pub fn ones(n: usize) -> Self {
        Self(DMatrix::from_element(n + 1, n + 1, 1.0))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.0 * c)
    }
}

/// Slabs `lo <= x1 <= hi` in which the dictionary is active.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerSet {
    pub intervals: Vec<(f64, f64)>,
}

impl LayerSet {
    pub fn contains(&self, x1: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| x1 >= lo && x1 <= hi)
    }
}

/// Spatial weight `sum_ij alpha_ij b_i(x2) b_j(x3)` inside a layer, 1 elsewhere.
pub fn dict_weight(
    grid2: &SplineGrid,
    grid3: &SplineGrid,
    alpha: &DictionaryCoeffs,
    x: [f64; 3],
    layers: &LayerSet,
) -> f64 {
    if !layers.contains(x[0]) {
        return 1.0;
    }
    tensor_weight(grid2, grid3, alpha.as_matrix(), x[1], x[2])
}

/// Spatial factor `b_r(x2) b_s(x3)` of the (r, s) dictionary entry; 0 outside layers.
pub fn dict_gradient_weight(
    grid2: &SplineGrid,
    grid3: &SplineGrid,
    r: usize,
    s: usize,
    x: [f64; 3],
    layers: &LayerSet,
) -> f64 {
    if !layers.contains(x[0]) {
        return 0.0;
    }
    grid2.eval(r, x[1]) * grid3.eval(s, x[2])
}

/// `sum_ij c_ij b_i(x2) b_j(x3)` using only the active hats.
pub fn tensor_weight(
    grid2: &SplineGrid,
    grid3: &SplineGrid,
    coeffs: &DMatrix<f64>,
    x2: f64,
    x3: f64,
) -> f64 {
    let mut w = 0.0;
    for (i, bi) in grid2.active(x2) {
        if bi == 0.0 {
            continue;
        }
        for (j, bj) in grid3.active(x3) {
            if bj != 0.0 {
                w += coeffs[(i, j)] * bi * bj;
            }
        }
    }
    w
}
