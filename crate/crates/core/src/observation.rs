//! Point sensors on the plate boundary: `Q U = G_bar M_b U` and its transpose.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::FieldHistory;
use crate::mesh::PlateMesh;
use crate::sparse::SparseMatrix;

/// Default measured displacement component (x3, the excitation direction).
pub const DEFAULT_COMPONENT: usize = 2;

#[derive(Debug, Clone)]
pub struct SensorArray {
    pub nodes: Vec<usize>,
    pub components: Vec<usize>,
    pub coords: Vec<[f64; 3]>,
    boundary_mass: SparseMatrix,
    dofs: Vec<usize>,
}

/// Where sensors sit on the plate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorLayout {
    /// This many equally spaced nodes on each edge of both x1 faces.
    PerEdge(usize),
    /// Explicit boundary node ids.
    Nodes(Vec<usize>),
}

impl SensorLayout {
    pub fn node_ids(&self, mesh: &PlateMesh) -> Result<Vec<usize>> {
        match self {
            Self::PerEdge(per_edge) => edge_nodes(mesh, *per_edge),
            Self::Nodes(nodes) => Ok(nodes.clone()),
        }
    }
}

/// Node ids for `per_edge` sensors per edge on both x1 faces; shared corners
/// are counted once, giving `8 * per_edge - 8` sensors.
pub fn edge_nodes(mesh: &PlateMesh, per_edge: usize) -> Result<Vec<usize>> {
    let [c0, c1, c2] = mesh.cells;
    if per_edge < 2 || per_edge > c1.min(c2) + 1 {
        return Err(Error::InvalidParameter(format!(
            "{per_edge} sensors per edge need 2 <= per_edge <= {} on this mesh",
            c1.min(c2) + 1
        )));
    }
    let pick = |n: usize, i: usize| ((i * n) as f64 / (per_edge - 1) as f64).round() as usize;
    let mut out = Vec::with_capacity(8 * per_edge);
    let mut seen = std::collections::HashSet::new();
    for i in [0, c0] {
        for e in 0..per_edge {
            let j = pick(c1, e);
            let k = pick(c2, e);
            for node in [
                mesh.node_index(i, j, 0),
                mesh.node_index(i, j, c2),
                mesh.node_index(i, 0, k),
                mesh.node_index(i, c1, k),
            ] {
                if seen.insert(node) {
                    out.push(node);
                }
            }
        }
    }
    Ok(out)
}

impl SensorArray {
    /// One sensor per node, measuring `components[i]` at `nodes[i]`.
    pub fn new(mesh: &PlateMesh, nodes: &[usize], components: &[usize]) -> Result<Self> {
        if nodes.len() != components.len() {
            return Err(Error::LengthMismatch {
                expected: nodes.len(),
                found: components.len(),
            });
        }
        for (&node, &c) in nodes.iter().zip(components) {
            if node >= mesh.node_count() || !mesh.is_boundary_node(node) {
                return Err(Error::InteriorNode(node));
            }
            if c > 2 {
                return Err(Error::InvalidParameter(format!("sensor component {c} is not 0, 1 or 2")));
            }
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            components: components.to_vec(),
            coords: nodes.iter().map(|&n| mesh.nodes[n]).collect(),
            boundary_mass: mesh.assemble_boundary_mass(),
            dofs: nodes.iter().zip(components).map(|(&n, &c)| 3 * n + c).collect(),
        })
    }

    /// All sensors measure the same component.
    pub fn uniform(mesh: &PlateMesh, nodes: &[usize], component: usize) -> Result<Self> {
        Self::new(mesh, nodes, &vec![component; nodes.len()])
    }

    pub fn from_layout(mesh: &PlateMesh, layout: &SensorLayout, component: usize) -> Result<Self> {
        Self::uniform(mesh, &layout.node_ids(mesh)?, component)
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Measured degree of freedom of each sensor.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn boundary_mass(&self) -> &SparseMatrix {
        &self.boundary_mass
    }

    /// `G_bar M_b u`; row `k` of `M_b` is symmetric so only that row is read.
    pub fn observe(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.boundary_mass.dim(), "state length");
        self.dofs
            .iter()
            .map(|&d| self.boundary_mass.row(d).map(|(c, v)| v * u[c]).sum())
            .collect()
    }

    /// `M_b G_bar^T a`, a load vector.
    pub fn observe_adjoint(&self, a: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), self.len(), "sensor data length");
        let mut out = vec![0.0; self.boundary_mass.dim()];
        for (&d, &ak) in self.dofs.iter().zip(a) {
            if ak == 0.0 {
                continue;
            }
            for (c, v) in self.boundary_mass.row(d) {
                out[c] += v * ak;
            }
        }
        out
    }

    pub fn observe_history(&self, u: &FieldHistory) -> Vec<Vec<f64>> {
        u.iter().map(|l| self.observe(l)).collect()
    }

    pub fn adjoint_history(&self, a: &[Vec<f64>]) -> Result<FieldHistory> {
        FieldHistory::from_levels(a.iter().map(|l| self.observe_adjoint(l)).collect())
    }
}
