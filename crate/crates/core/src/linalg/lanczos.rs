//! Lanczos iteration with full reorthogonalization for the largest eigenpairs
//! of a symmetric operator.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::symmetric::tql2;
use super::{dot, norm, SymmetricOperator};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct LanczosOptions<T> {
    /// Number of wanted eigenpairs.
    pub nev: usize,
    /// Convergence threshold on the Ritz residual estimate.
    pub tol: T,
    /// Ceiling on the Krylov dimension; `None` picks a default from `nev`.
    pub max_dim: Option<usize>,
    /// Bound on the true residual `‖Av − θv‖` of each returned pair.
    pub residual_limit: T,
    pub seed: u64,
}

impl<T: Real> LanczosOptions<T> {
    pub fn new(nev: usize) -> Self {
        LanczosOptions {
            nev,
            tol: T::lit(1e-10),
            max_dim: None,
            residual_limit: T::lit(1e-8),
            seed: 0x5eed,
        }
    }
}

/// Largest eigenpairs, sorted descending, eigenvectors as unit columns.
#[derive(Debug, Clone)]
pub struct LanczosResult<T> {
    pub values: Vec<T>,
    pub vectors: Array2<T>,
    pub iterations: usize,
    pub residuals: Vec<T>,
}

fn random_unit<T: Real>(rng: &mut ChaCha8Rng, n: usize, basis: &[Vec<T>]) -> Option<Vec<T>> {
    for _ in 0..8 {
        let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        for _ in 0..2 {
            orthogonalize(&mut v, basis);
        }
        let nv = norm(&v);
        if nv > T::lit(1e-8) {
            v.iter_mut().for_each(|x| *x = *x / nv);
            return Some(v);
        }
    }
    None
}

fn orthogonalize<T: Real>(w: &mut [T], basis: &[Vec<T>]) {
    for q in basis {
        let c = dot(w, q);
        for (wi, &qi) in w.iter_mut().zip(q) {
            *wi = *wi - c * qi;
        }
    }
}

pub fn lanczos_largest<T: Real, Op: SymmetricOperator<T> + ?Sized>(
    op: &Op,
    opts: &LanczosOptions<T>,
) -> Result<LanczosResult<T>> {
    let n = op.dim();
    let nev = opts.nev;
    if nev == 0 || nev > n {
        return Err(Error::param("nev", format!("must be in 1..={n}, got {nev}")));
    }
    let max_dim = opts
        .max_dim
        .unwrap_or_else(|| (20 * nev).max(300))
        .clamp(nev, n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Vec<T>> = Vec::with_capacity(max_dim);
    let mut alpha: Vec<T> = Vec::with_capacity(max_dim);
    let mut beta: Vec<T> = Vec::with_capacity(max_dim); // beta[j] couples j and j+1
    let mut w = vec![T::zero(); n];
    let mut q = random_unit(&mut rng, n, &basis).expect("nonzero start vector");
    let check_every = (nev / 4).max(5);
    let mut op_scale = T::zero();

    loop {
        op.apply(&q, &mut w);
        let a = dot(&w, &q);
        basis.push(q);
        alpha.push(a);
        op_scale = op_scale.max(a.abs());
        // full reorthogonalization, twice
        orthogonalize(&mut w, &basis);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        let k = basis.len();

        let breakdown = b <= T::epsilon().sqrt() * op_scale.max(T::one()) * T::lit(1e-4);
        let at_end = k == max_dim;
        if at_end || k == n || (k >= nev && (k - nev).is_multiple_of(check_every)) || breakdown {
            let (theta, s_last, s) = ritz(&alpha, &beta)?;
            let b_eff = if breakdown { T::zero() } else { b };
            let order: Vec<usize> = (0..k).rev().collect();
            // after a breakdown further copies of degenerate eigenvalues may be missing
            let converged = !breakdown
                && k >= nev
                && order
                    .iter()
                    .take(nev)
                    .all(|&i| (b_eff * s_last[i]).abs() <= opts.tol * theta[i].abs().max(T::one()));
            if converged || k == n {
                return finish(op, &basis, &s, &order[..nev], k, opts);
            }
            if at_end {
                let worst = order
                    .iter()
                    .take(nev)
                    .map(|&i| (b_eff * s_last[i]).abs().as_f64())
                    .fold(0.0, f64::max);
                return Err(Error::NoConvergence {
                    iterations: k,
                    residual: worst,
                });
            }
        }

        if breakdown {
            // invariant subspace: restart in its orthogonal complement
            beta.push(T::zero());
            q = match random_unit(&mut rng, n, &basis) {
                Some(v) => v,
                None => {
                    let (_, _, s) = ritz(&alpha, &beta[..k - 1])?;
                    let order: Vec<usize> = (0..k).rev().collect();
                    return finish(op, &basis, &s, &order[..nev.min(k)], k, opts);
                }
            };
        } else {
            beta.push(b);
            q = w.iter().map(|&x| x / b).collect();
        }
    }
}

/// Ritz values (ascending), last components of the Ritz vectors, and the full
/// eigenvector rows of the tridiagonal matrix.
#[allow(clippy::type_complexity)]
fn ritz<T: Real>(alpha: &[T], beta: &[T]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let k = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = vec![T::zero(); k];
    if k > 1 {
        e[1..k].copy_from_slice(&beta[..k - 1]);
    }
    let mut zt = vec![T::zero(); k * k];
    for i in 0..k {
        zt[i * k + i] = T::one();
    }
    tql2(&mut d, &mut e, Some(&mut zt))?;
    let last: Vec<T> = (0..k).map(|i| zt[i * k + k - 1]).collect();
    Ok((d, last, zt))
}

fn finish<T: Real, Op: SymmetricOperator<T> + ?Sized>(
    op: &Op,
    basis: &[Vec<T>],
    s: &[T],
    picks: &[usize],
    iterations: usize,
    opts: &LanczosOptions<T>,
) -> Result<LanczosResult<T>> {
    let n = op.dim();
    let k = basis.len();
    let mut vectors = Array2::zeros((n, picks.len()));
    let mut values = Vec::with_capacity(picks.len());
    let mut residuals = Vec::with_capacity(picks.len());
    let mut v = vec![T::zero(); n];
    let mut av = vec![T::zero(); n];
    for (col, &i) in picks.iter().enumerate() {
        v.iter_mut().for_each(|x| *x = T::zero());
        let si = &s[i * k..(i + 1) * k];
        for (q, &c) in basis.iter().zip(si) {
            for (vj, &qj) in v.iter_mut().zip(q) {
                *vj = *vj + c * qj;
            }
        }
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x = *x / nv);
        op.apply(&v, &mut av);
        let lam = dot(&av, &v);
        let r = av
            .iter()
            .zip(&v)
            .map(|(&a, &b)| (a - lam * b) * (a - lam * b))
            .sum::<T>()
            .sqrt();
        if !(r <= opts.residual_limit) {
            return Err(Error::NoConvergence {
                iterations,
                residual: r.as_f64(),
            });
        }
        values.push(lam);
        residuals.push(r);
        for (j, &x) in v.iter().enumerate() {
            vectors[(j, col)] = x;
        }
    }
    Ok(LanczosResult {
        values,
        vectors,
        iterations,
        residuals,
    })
}
