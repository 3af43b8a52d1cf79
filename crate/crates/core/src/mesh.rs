//! Structured trilinear hexahedral plate mesh, 2x2x2 Gauss quadrature and
//! mass / boundary-mass assembly.
//!
//! Nodes are numbered lexicographically with x1 fastest. Degrees of freedom
//! are interleaved as `3 * node + component`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::material::{LayerSet, Mat3};
use crate::sparse::{SparseMatrix, SparsityPattern};

/// Reference coordinates of the eight hexahedron corners.
pub const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

const GAUSS_2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Which elements carry the dictionary.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    /// Elements touching either x1-extreme face.
    OuterElementLayers,
    /// Elements whose centroid lies in one of the given x1 slabs.
    Slabs(LayerSet),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePoint {
    pub element: usize,
    pub reference: [f64; 3],
    pub x: [f64; 3],
    /// Gauss weight times the Jacobian determinant.
    pub weight: f64,
    pub shape: [f64; 8],
    /// Physical shape gradients `dN_a / dx_j`.
    pub grad: [[f64; 3]; 8],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub element: usize,
    /// Outward normal axis.
    pub axis: usize,
    pub upper: bool,
    /// Corner nodes in cyclic order.
    pub nodes: [usize; 4],
}

#[derive(Debug, Clone)]
pub struct PlateMesh {
    pub extents: [(f64, f64); 3],
    pub cells: [usize; 3],
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 8]>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub layer_flags: Vec<bool>,
    pub layers: LayerSet,
    boundary_nodes: Vec<bool>,
    qps: Vec<QuadraturePoint>,
    pattern: Arc<SparsityPattern>,
    /// For each element and local pair (a, b): offset of node `b`'s first
    /// column inside the rows of node `a`.
    block_offsets: Vec<[[usize; 8]; 8]>,
}

fn trilinear_shape(xi: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8]) {
    let mut n = [0.0; 8];
    let mut dn = [[0.0; 3]; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        let f = [
            0.5 * (1.0 + c[0] * xi[0]),
            0.5 * (1.0 + c[1] * xi[1]),
            0.5 * (1.0 + c[2] * xi[2]),
        ];
        n[a] = f[0] * f[1] * f[2];
        dn[a] = [
            0.5 * c[0] * f[1] * f[2],
            0.5 * c[1] * f[0] * f[2],
            0.5 * c[2] * f[0] * f[1],
        ];
    }
    (n, dn)
}

impl PlateMesh {
    pub fn build(extents: [(f64, f64); 3], cells: [usize; 3], layer_spec: &LayerSpec) -> Result<Self> {
        for (axis, &(lo, hi)) in extents.iter().enumerate() {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::DegenerateExtent { axis, lo, hi });
            }
        }
        if cells.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "cell counts must be at least 1, got {cells:?}"
            )));
        }
        let [n1, n2, n3] = cells;
        let (p1, p2) = (n1 + 1, n2 + 1);
        let coord = |axis: usize, i: usize| {
            let (lo, hi) = extents[axis];
            if i == cells[axis] {
                hi
            } else {
                lo + (hi - lo) * i as f64 / cells[axis] as f64
            }
        };
        let node_id = |i: usize, j: usize, k: usize| i + p1 * (j + p2 * k);

        let mut nodes = Vec::with_capacity(p1 * p2 * (n3 + 1));
        let mut boundary_nodes = Vec::with_capacity(nodes.capacity());
        for k in 0..=n3 {
            for j in 0..=n2 {
                for i in 0..=n1 {
                    nodes.push([coord(0, i), coord(1, j), coord(2, k)]);
                    boundary_nodes
                        .push(i == 0 || i == n1 || j == 0 || j == n2 || k == 0 || k == n3);
                }
            }
        }

        let mut elements = Vec::with_capacity(n1 * n2 * n3);
        let mut boundary_faces = Vec::new();
        let mut layer_flags = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    let e = elements.len();
                    let conn: [usize; 8] = std::array::from_fn(|a| {
                        let c = HEX_CORNERS[a];
                        node_id(
                            i + (c[0] > 0.0) as usize,
                            j + (c[1] > 0.0) as usize,
                            k + (c[2] > 0.0) as usize,
                        )
                    });
                    elements.push(conn);
                    let idx = [i, j, k];
                    for axis in 0..3 {
                        for upper in [false, true] {
                            let on_boundary = if upper {
                                idx[axis] + 1 == cells[axis]
                            } else {
                                idx[axis] == 0
                            };
                            if on_boundary {
                                boundary_faces.push(BoundaryFace {
                                    element: e,
                                    axis,
                                    upper,
                                    nodes: face_nodes(&conn, axis, upper),
                                });
                            }
                        }
                    }
                    let centroid_x1 = 0.5 * (coord(0, i) + coord(0, i + 1));
                    layer_flags.push(match layer_spec {
                        LayerSpec::OuterElementLayers => i == 0 || i + 1 == n1,
                        LayerSpec::Slabs(set) => set.contains(centroid_x1),
                        LayerSpec::None => false,
                    });
                }
            }
        }

        let layers = match layer_spec {
            LayerSpec::OuterElementLayers => {
                let (lo, hi) = extents[0];
                let h = (hi - lo) / n1 as f64;
                LayerSet {
                    intervals: vec![(lo, lo + h), (hi - h, hi)],
                }
            }
            LayerSpec::Slabs(set) => set.clone(),
            LayerSpec::None => LayerSet { intervals: vec![] },
        };

        let mut mesh = Self {
            extents,
            cells,
            nodes,
            elements,
            boundary_faces,
            layer_flags,
            layers,
            boundary_nodes,
            qps: Vec::new(),
            pattern: Arc::new(SparsityPattern::from_rows(vec![])),
            block_offsets: Vec::new(),
        };
        mesh.qps = mesh.compute_quadrature()?;
        mesh.build_pattern();
        Ok(mesh)
    }

    /// Plate `[-0.1, 0.1] x [-15, 15]^2` with outer element layers.
    pub fn plate(cells: [usize; 3]) -> Result<Self> {
        Self::build(
            [(-0.1, 0.1), (-15.0, 15.0), (-15.0, 15.0)],
            cells,
            &LayerSpec::OuterElementLayers,
        )
    }

    fn compute_quadrature(&self) -> Result<Vec<QuadraturePoint>> {
        let mut qps = Vec::with_capacity(8 * self.elements.len());
        for (e, conn) in self.elements.iter().enumerate() {
            for &g3 in &GAUSS_2 {
                for &g2 in &GAUSS_2 {
                    for &g1 in &GAUSS_2 {
                        let xi = [g1, g2, g3];
                        let (n, dn) = trilinear_shape(xi);
                        let mut jac = Mat3::zeros();
                        let mut x = [0.0; 3];
                        for a in 0..8 {
                            let p = self.nodes[conn[a]];
                            for r in 0..3 {
                                x[r] += n[a] * p[r];
                                for c in 0..3 {
                                    jac[(r, c)] += p[r] * dn[a][c];
                                }
                            }
                        }
                        let det = jac.determinant();
                        if !(det > 0.0) {
                            return Err(Error::InvalidParameter(format!(
                                "element {e} has non-positive Jacobian {det}"
                            )));
                        }
                        let inv = jac.try_inverse().expect("positive determinant");
                        let grad = std::array::from_fn(|a| {
                            let mut g = [0.0; 3];
                            for (j, gj) in g.iter_mut().enumerate() {
                                for c in 0..3 {
                                    *gj += dn[a][c] * inv[(c, j)];
                                }
                            }
                            g
                        });
                        qps.push(QuadraturePoint {
                            element: e,
                            reference: xi,
                            x,
                            weight: det,
                            shape: n,
                            grad,
                        });
                    }
                }
            }
        }
        Ok(qps)
    }

    fn build_pattern(&mut self) {
        let nn = self.nodes.len();
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nn];
        for conn in &self.elements {
            for &a in conn {
                neighbors[a].extend_from_slice(conn);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let rows = (0..3 * nn)
            .map(|dof| {
                neighbors[dof / 3]
                    .iter()
                    .flat_map(|&b| [3 * b, 3 * b + 1, 3 * b + 2])
                    .collect()
            })
            .collect();
        self.pattern = Arc::new(SparsityPattern::from_rows(rows));
        self.block_offsets = self
            .elements
            .iter()
            .map(|conn| {
                std::array::from_fn(|a| {
                    std::array::from_fn(|b| {
                        let k = neighbors[conn[a]]
                            .binary_search(&conn[b])
                            .expect("element nodes are neighbors");
                        3 * k
                    })
                })
            })
            .collect();
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.cells[0] + 1) * (j + (self.cells[1] + 1) * k)
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.boundary_nodes[node]
    }

    /// Per-dof flag: true on every degree of freedom of a boundary node.
    pub fn boundary_dofs(&self) -> Vec<bool> {
        self.boundary_nodes
            .iter()
            .flat_map(|&b| [b, b, b])
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn surface_area(&self) -> f64 {
        let l: Vec<f64> = self.extents.iter().map(|(lo, hi)| hi - lo).collect();
        2.0 * (l[0] * l[1] + l[1] * l[2] + l[0] * l[2])
    }

    pub fn quadrature(&self) -> &[QuadraturePoint] {
        &self.qps
    }

    /// The eight quadrature points of element `e`.
    pub fn element_quadrature(&self, e: usize) -> &[QuadraturePoint] {
        &self.qps[8 * e..8 * e + 8]
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Adds a dense 24x24 element block into `values` (CSR storage on the mesh pattern).
    pub fn scatter_element_matrix(&self, e: usize, local: &[[f64; 24]; 24], values: &mut [f64]) {
        let conn = &self.elements[e];
        let rp = self.pattern.row_ptr();
        for a in 0..8 {
            for i in 0..3 {
                let row_start = rp[3 * conn[a] + i];
                let lrow = &local[3 * a + i];
                for b in 0..8 {
                    let base = row_start + self.block_offsets[e][a][b];
                    for k in 0..3 {
                        values[base + k] += lrow[3 * b + k];
                    }
                }
            }
        }
    }

    /// `(J u)_{ij} = du_i/dx_j` at a quadrature point.
    pub fn eval_gradient(&self, u: &[f64], qp: &QuadraturePoint) -> Mat3 {
        debug_assert_eq!(u.len(), self.dof_count());
        let conn = &self.elements[qp.element];
        let mut g = Mat3::zeros();
        for a in 0..8 {
            let base = 3 * conn[a];
            let d = qp.grad[a];
            for i in 0..3 {
                let ui = u[base + i];
                g[(i, 0)] += ui * d[0];
                g[(i, 1)] += ui * d[1];
                g[(i, 2)] += ui * d[2];
            }
        }
        g
    }

    /// Interpolated displacement at a quadrature point.
    pub fn eval_value(&self, u: &[f64], qp: &QuadraturePoint) -> [f64; 3] {
        let conn = &self.elements[qp.element];
        let mut v = [0.0; 3];
        for a in 0..8 {
            for i in 0..3 {
                v[i] += qp.shape[a] * u[3 * conn[a] + i];
            }
        }
        v
    }

    /// `int ||J v||_F^2 dx`
    pub fn gradient_norm_sq(&self, v: &[f64]) -> f64 {
        self.qps
            .iter()
            .map(|qp| qp.weight * self.eval_gradient(v, qp).norm_squared())
            .sum()
    }

    /// Consistent mass matrix `M_rs = <phi_r, phi_s>`.
    pub fn assemble_mass(&self) -> SparseMatrix {
        let mut m = SparseMatrix::zeros(Arc::clone(&self.pattern), true);
        let mut local = [[0.0; 24]; 24];
        for e in 0..self.elements.len() {
            for row in local.iter_mut() {
                row.fill(0.0);
            }
            for qp in self.element_quadrature(e) {
                for a in 0..8 {
                    for b in 0..8 {
                        let v = qp.weight * qp.shape[a] * qp.shape[b];
                        for i in 0..3 {
                            local[3 * a + i][3 * b + i] += v;
                        }
                    }
                }
            }
            self.scatter_element_matrix(e, &local, m.values_mut());
        }
        m
    }

    /// Boundary mass `(M_bd)_rs = int_{boundary} <phi_r, phi_s> dxi`, 2x2 Gauss per face.
    pub fn assemble_boundary_mass(&self) -> SparseMatrix {
        let mut m = SparseMatrix::zeros(Arc::clone(&self.pattern), true);
        let values = m.values_mut();
        let pattern = Arc::clone(&self.pattern);
        for face in &self.boundary_faces {
            let p: [[f64; 3]; 4] = face.nodes.map(|n| self.nodes[n]);
            let mut local = [[0.0; 4]; 4];
            for &t in &GAUSS_2 {
                for &s in &GAUSS_2 {
                    let n = [
                        0.25 * (1.0 - s) * (1.0 - t),
                        0.25 * (1.0 + s) * (1.0 - t),
                        0.25 * (1.0 + s) * (1.0 + t),
                        0.25 * (1.0 - s) * (1.0 + t),
                    ];
                    let ds = [-0.25 * (1.0 - t), 0.25 * (1.0 - t), 0.25 * (1.0 + t), -0.25 * (1.0 + t)];
                    let dt = [-0.25 * (1.0 - s), -0.25 * (1.0 + s), 0.25 * (1.0 + s), 0.25 * (1.0 - s)];
                    let mut xs = [0.0; 3];
                    let mut xt = [0.0; 3];
                    for a in 0..4 {
                        for r in 0..3 {
                            xs[r] += ds[a] * p[a][r];
                            xt[r] += dt[a] * p[a][r];
                        }
                    }
                    let cross = [
                        xs[1] * xt[2] - xs[2] * xt[1],
                        xs[2] * xt[0] - xs[0] * xt[2],
                        xs[0] * xt[1] - xs[1] * xt[0],
                    ];
                    let da = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
                    for a in 0..4 {
                        for b in 0..4 {
                            local[a][b] += da * n[a] * n[b];
                        }
                    }
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    for i in 0..3 {
                        let pos = pattern
                            .position(3 * face.nodes[a] + i, 3 * face.nodes[b] + i)
                            .expect("face nodes share an element");
                        values[pos] += local[a][b];
                    }
                }
            }
        }
        m
    }
}

/// Corners of the element face normal to `axis`, ordered cyclically.
fn face_nodes(conn: &[usize; 8], axis: usize, upper: bool) -> [usize; 4] {
    let sign = if upper { 1.0 } else { -1.0 };
    let (b, c) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let cycle = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    cycle.map(|(sb, sc)| {
        let a = HEX_CORNERS
            .iter()
            .position(|x| x[axis] == sign && x[b] == sb && x[c] == sc)
            .expect("corner exists");
        conn[a]
    })
}
