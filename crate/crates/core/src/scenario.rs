//! Excitation loads and synthetic damage scenarios.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{FieldHistory, TimeGrid};
use crate::material::{DictionaryCoeffs, SplineGrid};
use crate::mesh::PlateMesh;

/// Separable point-like source `f_t(t) f2(x2) f3(x3) e3` centred on the plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExcitationParams {
    pub amplitude: f64,
    /// Support `[0, pulse_width]` of the raised-cosine pulse.
    pub pulse_width: f64,
    /// Half-width of the spatial hats in x2 and x3.
    pub spatial_halfwidth: f64,
}

impl Default for ExcitationParams {
    fn default() -> Self {
        Self {
            amplitude: 2.0,
            pulse_width: 2.0,
            spatial_halfwidth: 4.0,
        }
    }
}

impl ExcitationParams {
    /// `A (1 - cos(2 pi t / t_w)) / 2` on `[0, t_w]`, zero afterwards.
    pub fn pulse(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.pulse_width {
            return 0.0;
        }
        self.amplitude * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / self.pulse_width).cos())
    }

    pub fn spatial(&self, x2: f64, x3: f64) -> f64 {
        let hat = |x: f64| (1.0 - x.abs() / self.spatial_halfwidth).max(0.0);
        hat(x2) * hat(x3)
    }
}

/// Load vectors `MF^j = int f(t_j, x) . phi dx`, assembled by quadrature.
pub fn build_excitation(mesh: &PlateMesh, tg: &TimeGrid, params: &ExcitationParams) -> Result<FieldHistory> {
    if !(params.pulse_width > 0.0) || params.pulse_width > tg.horizon {
        return Err(Error::InvalidWidth(format!(
            "pulse width {} must lie in (0, T = {}]",
            params.pulse_width, tg.horizon
        )));
    }
    if !(params.spatial_halfwidth > 0.0) || !params.spatial_halfwidth.is_finite() {
        return Err(Error::InvalidWidth(format!(
            "spatial half-width {} must be positive",
            params.spatial_halfwidth
        )));
    }
    let mut shape = vec![0.0; mesh.dof_count()];
    for qp in mesh.quadrature() {
        let f = params.spatial(qp.x[1], qp.x[2]);
        if f == 0.0 {
            continue;
        }
        for (a, &node) in mesh.elements[qp.element].iter().enumerate() {
            shape[3 * node + 2] += qp.weight * f * qp.shape[a];
        }
    }
    let levels = (0..tg.levels())
        .map(|j| {
            let s = params.pulse(tg.time(j));
            shape.iter().map(|x| s * x).collect()
        })
        .collect();
    FieldHistory::from_levels(levels)
}

/// Axis-aligned damaged square in the `(x2, x3)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageSquare {
    pub center: [f64; 2],
    pub side: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub damage: Vec<DamageSquare>,
}

pub const DAMAGED_VALUE: f64 = 0.5;

impl Scenario {
    /// The three reference layouts `A`, `B` and `C` with unit squares.
    pub fn named(name: &str) -> Result<Self> {
        let centers: &[[f64; 2]] = match name.to_ascii_uppercase().as_str() {
            "A" => &[[-1.5, 1.5]],
            "B" => &[[5.5, 5.5], [-1.5, -10.5]],
            "C" => &[[-1.5, -4.5], [5.5, 5.5]],
            _ => return Err(Error::UnknownScenario(name.to_string())),
        };
        Ok(Self {
            name: name.to_ascii_uppercase(),
            damage: centers
                .iter()
                .map(|&center| DamageSquare {
                    center,
                    side: 1.0,
                    value: DAMAGED_VALUE,
                })
                .collect(),
        })
    }

    pub fn validate(&self, grid2: &SplineGrid, grid3: &SplineGrid) -> Result<()> {
        for sq in &self.damage {
            let h = 0.5 * sq.side;
            let inside = sq.center[0] - h >= grid2.a
                && sq.center[0] + h <= grid2.b
                && sq.center[1] - h >= grid3.a
                && sq.center[1] + h <= grid3.b;
            if !(sq.side > 0.0) || !inside || !(sq.value >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "damage square {sq:?} must have positive side, nonnegative value and lie inside the plate"
                )));
            }
        }
        Ok(())
    }

    /// Knot indices affected by each square: every knot inside the closed
    /// square, or the nearest knot when the square falls between knots.
    pub fn damaged_knots(&self, grid2: &SplineGrid, grid3: &SplineGrid) -> Vec<Vec<(usize, usize)>> {
        const EPS: f64 = 1e-9;
        self.damage
            .iter()
            .map(|sq| {
                let h = 0.5 * sq.side + EPS;
                let mut hits = Vec::new();
                for (i, x2) in grid2.knots().into_iter().enumerate() {
                    for (j, x3) in grid3.knots().into_iter().enumerate() {
                        if (x2 - sq.center[0]).abs() <= h && (x3 - sq.center[1]).abs() <= h {
                            hits.push((i, j));
                        }
                    }
                }
                if hits.is_empty() {
                    hits.push(nearest_knot(grid2, grid3, sq.center));
                }
                hits
            })
            .collect()
    }

    /// `alpha_true`: one everywhere except the damaged knots.
    pub fn true_coefficients(&self, grid2: &SplineGrid, grid3: &SplineGrid) -> Result<DictionaryCoeffs> {
        self.validate(grid2, grid3)?;
        let mut a = DMatrix::from_element(grid2.n + 1, grid3.n + 1, 1.0);
        for (sq, knots) in self.damage.iter().zip(self.damaged_knots(grid2, grid3)) {
            for (i, j) in knots {
                a[(i, j)] = sq.value;
            }
        }
        DictionaryCoeffs::new(a)
    }
}

pub fn nearest_knot(grid2: &SplineGrid, grid3: &SplineGrid, p: [f64; 2]) -> (usize, usize) {
    let idx = |g: &SplineGrid, x: f64| (((x - g.a) / g.spacing()).round().max(0.0) as usize).min(g.n);
    (idx(grid2, p[0]), idx(grid3, p[1]))
}
