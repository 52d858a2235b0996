use ndarray::{Array1, ArrayView1};

use crate::Real;

/// Compressed sparse row matrix (square).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from per-row `(column, value)` lists; each row is sorted by column.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => T::zero(),
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Same sparsity pattern with values transformed by `f(i, j, v)`.
    pub fn map(&self, f: impl Fn(usize, usize, T) -> T) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                values.push(f(i, j, v));
            }
        }
        Self {
            n: self.n,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values,
        }
    }

    pub fn matvec(&self, x: ArrayView1<T>) -> Array1<T> {
        Array1::from_shape_fn(self.n, |i| self.row(i).map(|(j, v)| v * x[j]).sum())
    }

    pub fn to_dense(&self) -> ndarray::Array2<T> {
        let mut out = ndarray::Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    /// Number of connected components of the nonzero pattern.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for (j, v) in self.row(i) {
                    if v > T::zero() && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }
}
