//! Row-compressed sparse matrices for message passing.

use ndarray::{Array2, ArrayView2, Axis};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(n_cols: usize, rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut offsets = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < n_cols);
                cols.push(c);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        SparseMatrix {
            n_rows: offsets.len() - 1,
            n_cols,
            offsets,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    /// `self · x`
    pub fn matmul(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n_cols, "sparse matmul shape");
        let mut out = Array2::zeros((self.n_rows, x.ncols()));
        for (r, mut dst) in out.axis_iter_mut(Axis(0)).enumerate() {
            for (c, v) in self.row(r) {
                dst.scaled_add(v, &x.row(c));
            }
        }
        out
    }

    /// `selfᵀ · x`
    pub fn t_matmul(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n_rows, "sparse transpose matmul shape");
        let mut out = Array2::zeros((self.n_cols, x.ncols()));
        for r in 0..self.n_rows {
            let src = x.row(r);
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &src);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                d[[r, c]] += v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn products_match_dense() {
        let a = SparseMatrix::from_rows(3, vec![vec![(0, 1.0), (2, 2.0)], vec![], vec![(1, -1.0)]]);
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(a.matmul(&x.view()), a.to_dense().dot(&x));
        assert_eq!(a.t_matmul(&x.view()), a.to_dense().t().dot(&x));
        assert_eq!(SparseMatrix::identity(3).matmul(&x.view()), x);
    }
}
