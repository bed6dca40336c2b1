//! Per-stencil RBF-FD weights and sparse global differentiation matrices,
//! plus the dense global construction used as a verification oracle.

use crate::error::{Error, Result};
use crate::kernels::{mq, mq_derivative, KernelConfig};
use crate::nodes::{NodeSet, StencilMap};
use nalgebra::{DMatrix, DVector};

/// Condition-estimate ceiling before a local solve is refused.
pub const COND_LIMIT: f64 = 1e14;

/// Dense-oracle size ceiling.
pub const DENSE_LIMIT: usize = 512;

/// The collocation system for one stencil: K[j,l] = phi(|x_j - x_l|) over the
/// stencil nodes, and the right-hand side of kernel-derivative samples taken
/// at the stencil center.
#[derive(Debug, Clone)]
pub struct LocalSystem {
    center: usize,
    stencil: Vec<usize>,
    coords: Vec<f64>,
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    cond_estimate: f64,
}

impl LocalSystem {
    pub fn assemble(
        nodes: &NodeSet,
        stencil: &[usize],
        center: usize,
        order: usize,
        cfg: &KernelConfig,
    ) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedDerivativeOrder(order));
        }
        let n = stencil.len();
        let coords: Vec<f64> = stencil.iter().map(|&j| nodes.x(j)).collect();
        let xc = nodes.x(center);
        let mut matrix = DMatrix::zeros(n, n);
        for j in 0..n {
            for l in 0..n {
                matrix[(j, l)] = mq((coords[j] - coords[l]).abs(), cfg);
            }
        }
        let mut rhs = DVector::zeros(n);
        for j in 0..n {
            rhs[j] = mq_derivative(xc - coords[j], order, cfg)?;
        }
        let sv = matrix.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let cond_estimate = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        Ok(Self { center, stencil: stencil.to_vec(), coords, matrix, rhs, cond_estimate })
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn stencil(&self) -> &[usize] {
        &self.stencil
    }

    pub fn stencil_coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn interpolation_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rhs_row(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    /// Solve K w = rhs for the weight row.
    pub fn solve(&self) -> Result<Vec<f64>> {
        if !self.cond_estimate.is_finite() || self.cond_estimate > COND_LIMIT {
            return Err(Error::SingularLocalSystem { node: self.center, cond: self.cond_estimate });
        }
        let lu = self.matrix.clone().lu();
        let w = lu
            .solve(&self.rhs)
            .ok_or(Error::SingularLocalSystem { node: self.center, cond: self.cond_estimate })?;
        Ok(w.iter().cloned().collect())
    }
}

/// RBF-FD weight row for node `center`: applying it to samples of any
/// function in the stencil's kernel span reproduces the order-k derivative at
/// the center.
pub fn local_weights(
    nodes: &NodeSet,
    stencils: &StencilMap,
    center: usize,
    order: usize,
    cfg: &KernelConfig,
) -> Result<Vec<f64>> {
    LocalSystem::assemble(nodes, stencils.neighbors(center), center, order, cfg)?.solve()
}

/// Sparse global differentiation matrix: row i holds the weight row of node i
/// scattered over its stencil columns. Exactly n nonzeros per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOperator {
    order: usize,
    n_nodes: usize,
    stencil_size: usize,
    shape_c: f64,
    /// column indices, row-major, `stencil_size` per row
    cols: Vec<usize>,
    /// weights matching `cols`
    vals: Vec<f64>,
}

impl DiffOperator {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn stencil_size(&self) -> usize {
        self.stencil_size
    }

    pub fn shape_c(&self) -> f64 {
        self.shape_c
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let n = self.stencil_size;
        (&self.cols[i * n..(i + 1) * n], &self.vals[i * n..(i + 1) * n])
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.n_nodes);
        debug_assert_eq!(out.len(), self.n_nodes);
        let n = self.stencil_size;
        for (i, out_i) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, v) in self.cols[i * n..(i + 1) * n].iter().zip(&self.vals[i * n..(i + 1) * n]) {
                acc += v * u[*c];
            }
            *out_i = acc;
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        self.apply_into(u, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_nodes, self.n_nodes);
        let n = self.stencil_size;
        for i in 0..self.n_nodes {
            for (c, v) in self.cols[i * n..(i + 1) * n].iter().zip(&self.vals[i * n..(i + 1) * n]) {
                m[(i, *c)] = *v;
            }
        }
        m
    }

    /// Assemble from already-computed rows; lengths must be consistent.
    /// Intended for tests and bindings that deserialize an operator.
    #[doc(hidden)]
    pub fn from_raw_parts(
        order: usize,
        n_nodes: usize,
        stencil_size: usize,
        shape_c: f64,
        cols: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self> {
        if cols.len() != n_nodes * stencil_size || vals.len() != cols.len() {
            return Err(Error::LengthMismatch { expected: n_nodes * stencil_size, got: cols.len() });
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= n_nodes) {
            return Err(Error::LengthMismatch { expected: n_nodes, got: c });
        }
        Ok(Self { order, n_nodes, stencil_size, shape_c, cols, vals })
    }

    /// Coordinate-format text dump: one `row col value` line per stored entry.
    pub fn dump_coo<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.stencil_size;
        for i in 0..self.n_nodes {
            for (c, v) in self.cols[i * n..(i + 1) * n].iter().zip(&self.vals[i * n..(i + 1) * n]) {
                writeln!(w, "{} {} {:.16e}", i, c, v)?;
            }
        }
        Ok(())
    }
}

/// Assemble the sparse order-k operator by solving one local system per node.
pub fn assemble_operator(
    nodes: &NodeSet,
    stencils: &StencilMap,
    order: usize,
    cfg: &KernelConfig,
) -> Result<DiffOperator> {
    let n_nodes = nodes.len();
    let n = stencils.stencil_size();
    let mut cols = Vec::with_capacity(n_nodes * n);
    let mut vals = Vec::with_capacity(n_nodes * n);
    for i in 0..n_nodes {
        let w = local_weights(nodes, stencils, i, order, cfg)?;
        cols.extend_from_slice(stencils.neighbors(i));
        vals.extend_from_slice(&w);
    }
    Ok(DiffOperator { order, n_nodes, stencil_size: n, shape_c: cfg.shape(), cols, vals })
}

/// Dense global operator L = K_L K^{-1} over all N nodes (verification
/// oracle; refuses N > DENSE_LIMIT).
pub fn global_dense_operator(
    nodes: &NodeSet,
    order: usize,
    cfg: &KernelConfig,
) -> Result<DMatrix<f64>> {
    if !(1..=3).contains(&order) {
        return Err(Error::UnsupportedDerivativeOrder(order));
    }
    let n = nodes.len();
    if n > DENSE_LIMIT {
        return Err(Error::DenseLimit { what: "global operator", limit: DENSE_LIMIT, n });
    }
    let x = nodes.coords();
    let mut k_mat = DMatrix::zeros(n, n);
    let mut k_l_t = DMatrix::zeros(n, n); // transpose of K_L
    for i in 0..n {
        for j in 0..n {
            k_mat[(i, j)] = mq((x[i] - x[j]).abs(), cfg);
            k_l_t[(j, i)] = mq_derivative(x[i] - x[j], order, cfg)?;
        }
    }
    // L = K_L K^{-1}  <=>  K L^T = K_L^T (K symmetric)
    let lu = k_mat.lu();
    let lt = lu.solve(&k_l_t).ok_or(Error::SingularGlobalSystem)?;
    Ok(lt.transpose())
}
