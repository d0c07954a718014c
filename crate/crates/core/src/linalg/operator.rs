use nalgebra::DMatrix;

use crate::graph::{AttributedGraph, Permutation};

/// A matrix known only through products with dense blocks.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `M · x`
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `Mᵀ · x`
    fn apply_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    fn is_finite(&self) -> bool;
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }

    fn apply_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(x)
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Sparse view of a graph adjacency, optionally relabeled by a permutation so that
/// entry `(p(i), p(j))` holds `A[i][j]`.
#[derive(Debug, Clone)]
pub struct AdjacencyOperator {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl AdjacencyOperator {
    pub fn from_graph(g: &AttributedGraph, perm: Option<&Permutation>) -> Self {
        let n = g.n();
        let map = |i: usize| perm.map_or(i, |p| p.apply(i));
        let mut rows = vec![Vec::new(); n];
        let mut cols = vec![Vec::new(); n];
        for i in 0..n {
            for &j in g.out_neighbors(i) {
                let w = g.adjacency()[(i, j)];
                rows[map(i)].push((map(j), w));
                cols[map(j)].push((map(i), w));
            }
        }
        for r in rows.iter_mut().chain(cols.iter_mut()) {
            r.sort_unstable_by_key(|e| e.0);
        }
        Self { n, rows, cols }
    }

    fn multiply(lists: &[Vec<(usize, f64)>], x: &DMatrix<f64>) -> DMatrix<f64> {
        // Work on the transpose so each node's block row is a contiguous column.
        let xt = x.transpose();
        let mut yt = DMatrix::zeros(xt.nrows(), lists.len());
        for (r, entries) in lists.iter().enumerate() {
            let mut col = yt.column_mut(r);
            for &(c, w) in entries {
                col.axpy(w, &xt.column(c), 1.0);
            }
        }
        yt.transpose()
    }
}

impl LinearOperator for AdjacencyOperator {
    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        Self::multiply(&self.rows, x)
    }

    fn apply_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        Self::multiply(&self.cols, x)
    }

    fn is_finite(&self) -> bool {
        true
    }
}
