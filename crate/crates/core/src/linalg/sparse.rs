use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from per-row `(column, value)` lists; columns are sorted and
    /// duplicates rejected.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Shape(format!("duplicate entry ({i}, {})", w[0].0)));
                }
            }
            for (j, v) in row {
                if j >= ncols {
                    return Err(Error::Shape(format!("column {j} out of range in row {i}")));
                }
                indices.push(j);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (idx, val) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => val[p],
            Err(_) => T::zero(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[usize], &[T])> + '_ {
        (0..self.nrows).map(move |i| self.row(i))
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Applies `f(i, j, v)` to every stored entry.
    pub fn map_indexed(&mut self, f: impl Fn(usize, usize, T) -> T + Sync) {
        let indptr = &self.indptr;
        let indices = &self.indices;
        for i in 0..self.nrows {
            for p in indptr[i]..indptr[i + 1] {
                self.data[p] = f(i, indices[p], self.data[p]);
            }
        }
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (idx, val) = self.row(i);
            *yi = idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum();
        });
    }

    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| {
                let (idx, val) = self.row(i);
                idx.iter().zip(val).all(|(&j, &v)| self.get(j, i) == v)
            })
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut a = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                a[(i, j)] = v;
            }
        }
        a
    }

    /// Number of connected components of the (symmetric) sparsity graph.
    pub fn connected_components(&self) -> usize {
        let n = self.nrows;
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for &j in self.row(i).0 {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }
}
