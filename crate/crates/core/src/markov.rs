//! Two-step Markov normalization of a kernel and its symmetric conjugate.

use ndarray::{Array1, Array2};

use crate::delay_kernel::{KernelBundle, KernelMatrix};
use crate::error::{Error, Result};
use crate::linalg::SymmetricOperator;
use crate::scalar::Real;

/// Normalization vectors and the symmetric kernel
/// `p̂(i, j) = k(i, j)/(σ̂(i) σ̂(j))`.
///
/// The row-stochastic kernel `p(i, j) = k(i, j)/(σ(i) ρ(j))` is never stored;
/// it is `D^{-1/2} p̂ D^{1/2}` with `D = diag(σ/ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovBundle<T> {
    pub rho: Array1<T>,
    pub sigma: Array1<T>,
    pub sigma_hat: Array1<T>,
    /// `σ/ρ`, the similarity-transform diagonal.
    pub d_scale: Array1<T>,
    p_hat: KernelMatrix<T>,
    pub epsilon: T,
    pub q: usize,
    pub k_nn: Option<usize>,
}

/// Normalizes a copy of the kernel.
pub fn normalize<T: Real>(k: &KernelBundle<T>) -> Result<MarkovBundle<T>> {
    into_markov(k.clone())
}

/// Normalizes in place, reusing the kernel storage for `p̂`.
pub fn into_markov<T: Real>(k: KernelBundle<T>) -> Result<MarkovBundle<T>> {
    let KernelBundle {
        kernel,
        epsilon,
        q,
        k_nn,
    } = k;
    let n = kernel.n();
    if n == 0 {
        return Err(Error::Shape("empty kernel".into()));
    }
    if let Some((row, col)) = kernel.find_invalid() {
        return Err(Error::InvalidKernelEntry { row, col });
    }
    if let KernelMatrix::Sparse(s) = &kernel {
        let c = s.connected_components();
        if c > 1 {
            return Err(Error::Disconnected { components: c });
        }
    }
    let nf = T::from_usize_lossy(n);
    let ones = vec![T::one(); n];
    let mut rho = vec![T::zero(); n];
    kernel.matvec(&ones, &mut rho);
    for (i, r) in rho.iter_mut().enumerate() {
        *r = *r / nf;
        if !(*r > T::zero()) {
            return Err(Error::ZeroRowSum { row: i });
        }
    }
    let inv_rho: Vec<T> = rho.iter().map(|&r| T::one() / r).collect();
    let mut sigma = vec![T::zero(); n];
    kernel.matvec(&inv_rho, &mut sigma);
    for (i, s) in sigma.iter_mut().enumerate() {
        *s = *s / nf;
        if !(*s > T::zero()) {
            return Err(Error::ZeroRowSum { row: i });
        }
    }
    let sigma_hat: Vec<T> = sigma.iter().zip(&rho).map(|(&s, &r)| (s * r).sqrt()).collect();
    let d_scale: Vec<T> = sigma.iter().zip(&rho).map(|(&s, &r)| s / r).collect();
    let inv_hat: Vec<T> = sigma_hat.iter().map(|&s| T::one() / s).collect();
    let mut p_hat = kernel;
    p_hat.map_indexed(|i, j, v| v * (inv_hat[i] * inv_hat[j]));
    Ok(MarkovBundle {
        rho: Array1::from(rho),
        sigma: Array1::from(sigma),
        sigma_hat: Array1::from(sigma_hat),
        d_scale: Array1::from(d_scale),
        p_hat,
        epsilon,
        q,
        k_nn,
    })
}

impl<T: Real> MarkovBundle<T> {
    /// Reassembles a bundle from stored `p̂`, ρ and σ.
    pub fn from_parts(
        rho: Array1<T>,
        sigma: Array1<T>,
        p_hat: KernelMatrix<T>,
        epsilon: T,
        q: usize,
        k_nn: Option<usize>,
    ) -> Result<Self> {
        let n = p_hat.n();
        if rho.len() != n || sigma.len() != n {
            return Err(Error::Shape("normalization vectors do not match the matrix".into()));
        }
        if let Some(i) = rho.iter().zip(&sigma).position(|(&r, &s)| !(r > T::zero() && s > T::zero())) {
            return Err(Error::ZeroRowSum { row: i });
        }
        let sigma_hat = rho.iter().zip(&sigma).map(|(&r, &s)| (s * r).sqrt()).collect();
        let d_scale = rho.iter().zip(&sigma).map(|(&r, &s)| s / r).collect();
        Ok(MarkovBundle {
            rho,
            sigma,
            sigma_hat,
            d_scale,
            p_hat,
            epsilon,
            q,
            k_nn,
        })
    }

    pub fn n_emb(&self) -> usize {
        self.rho.len()
    }

    pub fn p_hat(&self) -> &KernelMatrix<T> {
        &self.p_hat
    }

    /// The symmetric operator `p̂/N` whose spectrum is computed.
    pub fn symmetric_operator(&self) -> WeightedOperator<'_, T> {
        WeightedOperator {
            matrix: &self.p_hat,
            scale: T::one() / T::from_usize_lossy(self.n_emb()),
        }
    }

    /// `P f` for the row-stochastic operator.
    pub fn apply_markov(&self, f: &[T]) -> Result<Vec<T>> {
        let n = self.n_emb();
        if f.len() != n {
            return Err(Error::Shape(format!("vector has length {}, expected {n}", f.len())));
        }
        let x: Vec<T> = f.iter().zip(&self.d_scale).map(|(&v, &d)| v * d.sqrt()).collect();
        let mut y = vec![T::zero(); n];
        self.symmetric_operator().apply(&x, &mut y);
        Ok(y.iter().zip(&self.d_scale).map(|(&v, &d)| v / d.sqrt()).collect())
    }

    /// `max_i |(1/N) Σ_j p(i, j) − 1|`, evaluated through `p̂`.
    pub fn row_stochastic_residual(&self) -> T {
        let ones = vec![T::one(); self.n_emb()];
        self.apply_markov(&ones)
            .expect("length matches")
            .into_iter()
            .map(|v| (v - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Kernel entry recovered from `p̂`.
    pub fn kernel_entry(&self, i: usize, j: usize) -> T {
        self.p_hat.get(i, j) * self.sigma_hat[i] * self.sigma_hat[j]
    }

    /// Dense Markov kernel `p(i, j)`, so that `(Pf)(i) = (1/N) Σ_j p(i, j) f(j)`
    /// and each row of `p/N` sums to 1. Intended for small problems.
    pub fn markov_matrix(&self) -> Array2<T> {
        let n = self.n_emb();
        Array2::from_shape_fn((n, n), |(i, j)| {
            self.p_hat.get(i, j) * (self.d_scale[j] / self.d_scale[i]).sqrt()
        })
    }
}

/// `x ↦ scale · A x`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedOperator<'a, T> {
    pub matrix: &'a KernelMatrix<T>,
    pub scale: T,
}

impl<T: Real> SymmetricOperator<T> for WeightedOperator<'_, T> {
    fn dim(&self) -> usize {
        self.matrix.n()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matrix.matvec(x, y);
        for v in y.iter_mut() {
            *v = *v * self.scale;
        }
    }
}
