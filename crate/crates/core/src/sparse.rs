//! Compressed sparse row matrices and the conjugate gradient solver.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row offsets and sorted column indices, shared by every matrix assembled on
/// the same mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from per-row column lists; columns are sorted and deduplicated.
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            debug_assert!(cols.last().is_none_or(|&c| c < dim));
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        Self {
            dim,
            row_ptr,
            col_idx,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Storage index of entry `(r, c)`, if it is in the pattern.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        self.row(r)
            .binary_search(&c)
            .ok()
            .map(|k| self.row_ptr[r] + k)
    }
}

/// Square CSR matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>, symmetric: bool) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self {
            pattern,
            values,
            symmetric,
        }
    }

    pub fn from_parts(pattern: Arc<SparsityPattern>, values: Vec<f64>, symmetric: bool) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        Self {
            pattern,
            values,
            symmetric,
        }
    }

    /// Keeps every entry of `a` whose magnitude is nonzero.
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|r| (0..n).filter(|&c| a[(r, c)] != 0.0).collect())
            .collect();
        let pattern = Arc::new(SparsityPattern::from_rows(rows));
        let values = (0..n)
            .flat_map(|r| pattern.row(r).iter().map(move |&c| a[(r, c)]).collect::<Vec<_>>())
            .collect();
        let symmetric = a == &a.transpose();
        Self {
            pattern,
            values,
            symmetric,
        }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Arc::new(SparsityPattern::from_rows((0..n).map(|r| vec![r]).collect()));
        Self {
            pattern,
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pattern.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Nonzero structure of row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1];
        self.pattern.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in rp[r]..rp[r + 1] {
                acc += self.values[k] * x[ci[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `a * self + b * other`; both matrices must share one pattern.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> SparseMatrix {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "patterns differ"
        );
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SparseMatrix {
            pattern: Arc::clone(&self.pattern),
            values,
            symmetric: self.symmetric && other.symmetric,
        }
    }

    /// Largest `|A_rc - A_cr|` over the stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Replaces rows and columns of `fixed` dofs by identity rows.
    pub fn constrain(&mut self, fixed: &[bool]) {
        assert_eq!(fixed.len(), self.dim());
        let rp = self.pattern.row_ptr.clone();
        for r in 0..self.dim() {
            for k in rp[r]..rp[r + 1] {
                let c = self.pattern.col_idx[k];
                if fixed[r] || fixed[c] {
                    self.values[k] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for r in 0..n {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CgConfig {
    pub rel_tol: f64,
    /// Defaults to ten times the dimension when absent.
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub preconditioner: Preconditioner,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: None,
            preconditioner: Preconditioner::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Explicitly recomputed `||Ax - b||`.
    pub residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x0`.
///
/// Converged when `||Ax - b|| <= rel_tol * ||b||`, checked against the
/// recomputed residual rather than the recursive one.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], x0: &[f64], cfg: &CgConfig) -> Result<CgSolution> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if x0.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if !(cfg.rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "CG tolerance must be positive, got {}",
            cfg.rel_tol
        )));
    }
    let max_iter = cfg.max_iter.unwrap_or(10 * n.max(1));
    let b_norm = norm(b);
    if b_norm == 0.0 {
        let ax = a.mul_vec(x0);
        let x = if norm(&ax) == 0.0 {
            x0.to_vec()
        } else {
            vec![0.0; n]
        };
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = cfg.rel_tol * b_norm;

    let inv_diag: Option<Vec<f64>> = match cfg.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => Some(
            (0..n)
                .map(|r| {
                    let d = a.get(r, r);
                    if d > 0.0 {
                        1.0 / d
                    } else {
                        1.0
                    }
                })
                .collect(),
        ),
    };
    let apply_prec = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(d) => z.iter_mut().zip(r).zip(d).for_each(|((z, r), d)| *z = r * d),
        None => z.copy_from_slice(r),
    };

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        a.mul_vec_into(x, ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        norm(r)
    };

    let mut res = true_residual(&x, &mut r, &mut ap);
    let mut iterations = 0;
    // Outer loop restarts from the true residual whenever the recursive one
    // claims convergence but the recomputed one disagrees.
    while res > target {
        apply_prec(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        loop {
            if iterations >= max_iter {
                return Err(Error::NotConverged {
                    iterations,
                    residual: true_residual(&x, &mut r, &mut ap),
                });
            }
            a.mul_vec_into(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if !(curvature > 0.0) {
                return Err(Error::IndefiniteMatrix {
                    iteration: iterations,
                    curvature,
                });
            }
            let step = rz / curvature;
            axpy(step, &p, &mut x);
            axpy(-step, &ap, &mut r);
            iterations += 1;
            if norm(&r) <= target {
                break;
            }
            apply_prec(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        res = true_residual(&x, &mut r, &mut ap);
    }
    Ok(CgSolution {
        x,
        iterations,
        residual: res,
    })
}
