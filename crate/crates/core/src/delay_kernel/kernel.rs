use ndarray::Array2;
use rayon::prelude::*;

use super::distance::DelayDistanceMatrix;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SymmetricOperator};
use crate::scalar::Real;

/// Symmetric nonnegative kernel, stored dense or in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelMatrix<T> {
    Dense(Array2<T>),
    Sparse(CsrMatrix<T>),
}

impl<T: Real> KernelMatrix<T> {
    pub fn n(&self) -> usize {
        match self {
            KernelMatrix::Dense(a) => a.nrows(),
            KernelMatrix::Sparse(s) => s.nrows(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, KernelMatrix::Dense(_))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match self {
            KernelMatrix::Dense(a) => a[(i, j)],
            KernelMatrix::Sparse(s) => s.get(i, j),
        }
    }

    pub fn to_dense(&self) -> Array2<T> {
        match self {
            KernelMatrix::Dense(a) => a.clone(),
            KernelMatrix::Sparse(s) => s.to_dense(),
        }
    }

    /// Stored entries per row (`n` for dense).
    pub fn row_nnz(&self, i: usize) -> usize {
        match self {
            KernelMatrix::Dense(a) => a.ncols(),
            KernelMatrix::Sparse(s) => s.row(i).0.len(),
        }
    }

    /// `y_i = Σ_j k(i, j) x_j`.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        match self {
            KernelMatrix::Dense(a) => a.apply(x, y),
            KernelMatrix::Sparse(s) => s.matvec(x, y),
        }
    }

    /// Replaces each entry by `f(i, j, k(i, j))`.
    pub fn map_indexed(&mut self, f: impl Fn(usize, usize, T) -> T + Sync) {
        match self {
            KernelMatrix::Dense(a) => {
                a.axis_iter_mut(ndarray::Axis(0))
                    .into_par_iter()
                    .enumerate()
                    .for_each(|(i, mut row)| {
                        for (j, v) in row.iter_mut().enumerate() {
                            *v = f(i, j, *v);
                        }
                    });
            }
            KernelMatrix::Sparse(s) => s.map_indexed(f),
        }
    }

    /// First entry that is negative or non-finite.
    pub fn find_invalid(&self) -> Option<(usize, usize)> {
        match self {
            KernelMatrix::Dense(a) => a
                .indexed_iter()
                .find(|(_, v)| !(v.is_finite() && **v >= T::zero()))
                .map(|(ij, _)| ij),
            KernelMatrix::Sparse(s) => s.rows().enumerate().find_map(|(i, (idx, val))| {
                idx.iter()
                    .zip(val)
                    .find(|(_, v)| !(v.is_finite() && **v >= T::zero()))
                    .map(|(&j, _)| (i, j))
            }),
        }
    }

    /// Largest `|k(i, j) − k(j, i)|`.
    pub fn asymmetry(&self) -> T {
        match self {
            KernelMatrix::Dense(a) => {
                let n = a.nrows();
                (0..n)
                    .flat_map(|i| (0..i).map(move |j| (i, j)))
                    .map(|(i, j)| (a[(i, j)] - a[(j, i)]).abs())
                    .fold(T::zero(), T::max)
            }
            KernelMatrix::Sparse(s) => s
                .rows()
                .enumerate()
                .flat_map(|(i, (idx, val))| idx.iter().zip(val).map(move |(&j, &v)| (i, j, v)))
                .map(|(i, j, v)| (v - s.get(j, i)).abs())
                .fold(T::zero(), T::max),
        }
    }
}

impl<T: Real> SymmetricOperator<T> for KernelMatrix<T> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec(x, y)
    }
}

/// Kernel matrix together with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBundle<T> {
    pub kernel: KernelMatrix<T>,
    pub epsilon: T,
    pub q: usize,
    pub k_nn: Option<usize>,
}

impl<T: Real> KernelBundle<T> {
    pub fn n_emb(&self) -> usize {
        self.kernel.n()
    }
}

fn check_epsilon<T: Real>(epsilon: T) -> Result<()> {
    if !(epsilon > T::zero() && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    Ok(())
}

/// `k(i, j) = exp(−d²(i, j)/ε)`.
pub fn gaussian_kernel<T: Real>(d: &DelayDistanceMatrix<T>, epsilon: T) -> Result<KernelBundle<T>> {
    into_gaussian_kernel(d.clone(), epsilon)
}

/// As [`gaussian_kernel`], reusing the distance storage.
pub fn into_gaussian_kernel<T: Real>(
    d: DelayDistanceMatrix<T>,
    epsilon: T,
) -> Result<KernelBundle<T>> {
    into_shaped_kernel(d, epsilon, |u: T| (-u).exp())
}

/// Kernel `k(i, j) = shape(d²(i, j)/ε)` for a caller-supplied shape function.
pub fn into_shaped_kernel<T: Real>(
    d: DelayDistanceMatrix<T>,
    epsilon: T,
    shape: impl Fn(T) -> T + Sync,
) -> Result<KernelBundle<T>> {
    check_epsilon(epsilon)?;
    let q = d.q();
    let mut k = KernelMatrix::Dense(d.into_entries());
    k.map_indexed(|_, _, v| shape(v / epsilon));
    Ok(KernelBundle {
        kernel: k,
        epsilon,
        q,
        k_nn: None,
    })
}

/// Gaussian kernel rows for out-of-sample points given their squared distances.
pub fn gaussian_rows<T: Real>(sq_dist: &Array2<T>, epsilon: T) -> Result<Array2<T>> {
    check_epsilon(epsilon)?;
    Ok(sq_dist.mapv(|v| (-v / epsilon).exp()))
}

/// Keeps the diagonal and the `k_nn` largest off-diagonal entries of each row,
/// then symmetrizes by union of the retained patterns.
pub fn sparsify_knn<T: Real>(k: &KernelBundle<T>, k_nn: usize) -> Result<KernelBundle<T>> {
    let n = k.n_emb();
    if k_nn < 1 || k_nn >= n {
        return Err(Error::param("k_nn", format!("must satisfy 1 <= k_nn < {n}, got {k_nn}")));
    }
    let dense = match &k.kernel {
        KernelMatrix::Dense(a) => a,
        KernelMatrix::Sparse(_) => {
            return Err(Error::param("kernel", "already sparse"));
        }
    };
    let keep: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = dense.row(i);
            let mut cols: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let key = |&j: &usize| (std::cmp::Reverse(OrdKey(row[j])), j);
            if k_nn < cols.len() {
                cols.select_nth_unstable_by_key(k_nn - 1, key);
                cols.truncate(k_nn);
            }
            cols.push(i);
            cols
        })
        .collect();
    let mut pattern: Vec<Vec<usize>> = keep.clone();
    for (i, cols) in keep.iter().enumerate() {
        for &j in cols {
            if j != i {
                pattern[j].push(i);
            }
        }
    }
    let rows: Vec<Vec<(usize, T)>> = pattern
        .into_iter()
        .enumerate()
        .map(|(i, mut cols)| {
            cols.sort_unstable();
            cols.dedup();
            cols.into_iter().map(|j| (j, dense[(i, j)])).collect()
        })
        .collect();
    Ok(KernelBundle {
        kernel: KernelMatrix::Sparse(CsrMatrix::from_rows(n, rows)?),
        epsilon: k.epsilon,
        q: k.q,
        k_nn: Some(k_nn),
    })
}

#[derive(PartialEq, Clone, Copy)]
struct OrdKey<T>(T);

impl<T: PartialEq> Eq for OrdKey<T> {}

impl<T: PartialOrd> PartialOrd for OrdKey<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for OrdKey<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).unwrap_or(std::cmp::Ordering::Equal)
    }
}
