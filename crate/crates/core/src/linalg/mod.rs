//! Dense and sparse eigensolvers used by the spectral pipeline.

mod general;
mod lanczos;
mod sparse;
mod symmetric;

use ndarray::Array2;
use rayon::prelude::*;

pub use general::{complex_eigen, general_eigen, normalize_phase, GeneralEigen};
pub use lanczos::{lanczos_largest, LanczosOptions, LanczosResult};
pub use sparse::CsrMatrix;
pub use symmetric::{symmetric_eigen, tql2, SymmetricEigen};

use crate::scalar::Real;

/// A symmetric linear map `y = A x`.
pub trait SymmetricOperator<T>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

impl<T: Real> SymmetricOperator<T> for Array2<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let row = self.row(i);
            *yi = match row.as_slice() {
                Some(r) => dot(r, x),
                None => row.iter().zip(x).map(|(&a, &b)| a * b).sum(),
            };
        });
    }
}

impl<T: Real> SymmetricOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec(x, y)
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // four accumulators help the autovectorizer
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] = acc[l] + a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s = s + a[i] * b[i];
    }
    s
}

pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
