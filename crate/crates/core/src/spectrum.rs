//! Leading eigenpairs of the symmetric Markov operator, Sobolev weights, and
//! out-of-sample extension.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lanczos_largest, symmetric_eigen, LanczosOptions, SymmetricOperator};
use crate::markov::MarkovBundle;
use crate::scalar::Real;

/// Eigenvalues at or below this are treated as zero.
pub const ZERO_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Dense up to `dense_limit`, Lanczos above.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone)]
pub struct EigenOptions<T> {
    pub solver: Solver,
    pub dense_limit: usize,
    pub tol: T,
    pub seed: u64,
}

impl<T: Real> Default for EigenOptions<T> {
    fn default() -> Self {
        EigenOptions {
            solver: Solver::Auto,
            dense_limit: 1024,
            tol: T::lit(1e-10),
            seed: 0x5eed,
        }
    }
}

/// Ordered data-driven basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSpectrum<T> {
    /// `λ_0 ≥ λ_1 ≥ … ≥ λ_m`.
    pub lambdas: Array1<T>,
    /// Column `j` is `φ_j` on the embedded samples.
    pub phis: Array2<T>,
    pub etas: Array1<T>,
    /// Weight `σ/ρ` of the inner product `⟨f, g⟩ = (1/N) Σ f σ̃ g`.
    pub weights: Array1<T>,
    /// `‖P̂ v − λ v‖/‖v‖` per returned pair.
    pub residuals: Vec<T>,
    pub solver: Solver,
}

impl<T: Real> MarkovSpectrum<T> {
    /// Number of nontrivial eigenfunctions `m`.
    pub fn m(&self) -> usize {
        self.lambdas.len() - 1
    }

    pub fn n_emb(&self) -> usize {
        self.phis.nrows()
    }

    /// `(1/N) Σ_n f(n) σ̃(n) g(n)`.
    pub fn inner(&self, f: &[T], g: &[T]) -> T {
        let n = T::from_usize_lossy(f.len());
        f.iter()
            .zip(g)
            .zip(self.weights.iter())
            .map(|((&a, &b), &w)| a * w * b)
            .sum::<T>()
            / n
    }

    /// Gram matrix of the stored eigenfunctions.
    pub fn gram(&self) -> Array2<T> {
        let k = self.phis.ncols();
        let cols: Vec<Vec<T>> = (0..k).map(|j| self.phis.column(j).to_vec()).collect();
        Array2::from_shape_fn((k, k), |(i, j)| self.inner(&cols[i], &cols[j]))
    }
}

/// `η_j = (1/λ_j − 1)/(1/λ_1 − 1)` with `η_0 = 0` and `η_1 = 1`.
///
/// Zero eigenvalues get `η = ∞`, except when `λ_1` is itself zero, in which
/// case every nontrivial weight is 1.
pub fn sobolev_weights<T: Real>(lambdas: &[T]) -> Array1<T> {
    let tiny = T::lit(ZERO_EIGENVALUE);
    let mut etas = Array1::zeros(lambdas.len());
    if lambdas.len() < 2 {
        return etas;
    }
    let l1 = lambdas[1];
    for (j, eta) in etas.iter_mut().enumerate().skip(1) {
        let lj = lambdas[j];
        *eta = if j == 1 || l1 <= tiny {
            T::one()
        } else if lj <= tiny {
            T::infinity()
        } else {
            (T::one() / lj - T::one()) / (T::one() / l1 - T::one())
        };
    }
    etas
}

/// First component of largest modulus is made positive.
fn fix_sign<T: Real>(v: &mut [T]) {
    let slack = T::one() + T::lit(1e3) * T::epsilon();
    let mut best = 0;
    let mut best_abs = T::zero();
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best_abs * slack {
            best = i;
            best_abs = x.abs();
        }
    }
    if v[best] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn eigendecompose<T: Real>(markov: &MarkovBundle<T>, m: usize) -> Result<MarkovSpectrum<T>> {
    eigendecompose_with(markov, m, &EigenOptions::default())
}

/// Top `m + 1` eigenpairs of `p̂/N`, mapped to `φ_j = D^{-1/2} v̂_j` with
/// `(1/N)‖v̂_j‖² = 1`.
pub fn eigendecompose_with<T: Real>(
    markov: &MarkovBundle<T>,
    m: usize,
    opts: &EigenOptions<T>,
) -> Result<MarkovSpectrum<T>> {
    let n = markov.n_emb();
    if m < 1 || m >= n {
        return Err(Error::param("m", format!("must satisfy 1 <= m < {n}, got {m}")));
    }
    let nev = m + 1;
    let op = markov.symmetric_operator();
    let solver = match opts.solver {
        Solver::Auto if n <= opts.dense_limit => Solver::Dense,
        Solver::Auto => Solver::Lanczos,
        s => s,
    };
    // (value, solver index, unit vector)
    let mut pairs: Vec<(T, usize, Vec<T>)> = match solver {
        Solver::Dense => {
            let mut a = markov.p_hat().to_dense();
            a.mapv_inplace(|v| v * op.scale);
            let eig = symmetric_eigen(&a)?;
            drop(a);
            (0..nev)
                .map(|r| {
                    let idx = n - 1 - r;
                    (eig.values[idx], r, eig.vectors.column(idx).to_vec())
                })
                .collect()
        }
        _ => {
            let mut lo = LanczosOptions::new(nev);
            lo.tol = opts.tol;
            lo.seed = opts.seed;
            let res = lanczos_largest(&op, &lo)?;
            res.values
                .iter()
                .enumerate()
                .map(|(r, &v)| (v, r, res.vectors.column(r).to_vec()))
                .collect()
        }
    };
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));

    let l1 = pairs[1].0;
    if l1 >= T::one() - T::lit(1e-10) {
        return Err(Error::DegenerateUnitEigenvalue { lambda1: l1.as_f64() });
    }

    let sqrt_n = T::from_usize_lossy(n).sqrt();
    let inv_sqrt_d: Vec<T> = markov.d_scale.iter().map(|&d| T::one() / d.sqrt()).collect();
    let mut phis = Array2::zeros((n, nev));
    let mut lambdas = Array1::zeros(nev);
    let mut residuals = Vec::with_capacity(nev);
    let mut av = vec![T::zero(); n];
    for (j, (lam, _, mut v)) in pairs.into_iter().enumerate() {
        let nv = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        v.iter_mut().for_each(|x| *x = *x / nv);
        fix_sign(&mut v);
        op.apply(&v, &mut av);
        let r = av.iter().zip(&v).map(|(&a, &b)| (a - lam * b) * (a - lam * b)).sum::<T>().sqrt();
        residuals.push(r);
        lambdas[j] = lam;
        for (i, &x) in v.iter().enumerate() {
            phis[(i, j)] = x * sqrt_n * inv_sqrt_d[i];
        }
    }
    let etas = sobolev_weights(lambdas.as_slice().expect("contiguous"));
    Ok(MarkovSpectrum {
        lambdas,
        phis,
        etas,
        weights: markov.d_scale.clone(),
        residuals,
        solver,
    })
}

/// Nyström extension `φ_j(x) = λ_j^{-1} (1/N) Σ_n p(x, x_n) φ_j(n)` of the
/// eigenfunctions listed in `which`, given kernel rows `k(x, x_n)` for the new
/// points. Returns one row per new point.
pub fn nystrom_extend<T: Real>(
    markov: &MarkovBundle<T>,
    spectrum: &MarkovSpectrum<T>,
    new_kernel_rows: &Array2<T>,
    which: &[usize],
) -> Result<Array2<T>> {
    let n = markov.n_emb();
    if new_kernel_rows.ncols() != n || spectrum.n_emb() != n {
        return Err(Error::Shape(format!(
            "kernel rows have {} columns, basis has {} samples",
            new_kernel_rows.ncols(),
            n
        )));
    }
    for &j in which {
        if j >= spectrum.lambdas.len() {
            return Err(Error::param("which", format!("index {j} beyond basis size")));
        }
        let lam = spectrum.lambdas[j];
        if !(lam > T::lit(ZERO_EIGENVALUE)) {
            return Err(Error::SmallEigenvalue {
                index: j,
                lambda: lam.as_f64(),
            });
        }
    }
    let nf = T::from_usize_lossy(n);
    let inv_rho: Vec<T> = markov.rho.iter().map(|&r| T::one() / r).collect();
    let cols: Vec<Vec<T>> = which.iter().map(|&j| spectrum.phis.column(j).to_vec()).collect();
    let rows: Vec<Result<Vec<T>>> = new_kernel_rows
        .outer_iter()
        .into_par_iter()
        .enumerate()
        .map(|(r, k)| {
            let sigma = k.iter().zip(&inv_rho).map(|(&a, &b)| a * b).sum::<T>() / nf;
            if !(sigma > T::zero()) {
                return Err(Error::ZeroRowSum { row: r });
            }
            // weights p(x, x_n)/N
            let w: Vec<T> = k
                .iter()
                .zip(&inv_rho)
                .map(|(&a, &b)| a * b / (sigma * nf))
                .collect();
            Ok(which
                .iter()
                .zip(&cols)
                .map(|(&j, phi)| w.iter().zip(phi).map(|(&a, &b)| a * b).sum::<T>() / spectrum.lambdas[j])
                .collect())
        })
        .collect();
    let mut out = Array2::zeros((new_kernel_rows.nrows(), which.len()));
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row?.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_kernel::{delay_distance_matrix, gaussian_kernel, KernelBundle, KernelMatrix};
    use crate::markov::normalize;
    use crate::test_util::random_traj;
    use ndarray::arr2;

    fn circle_markov(n: usize, eps: f64) -> MarkovBundle<f64> {
        // uneven sampling density so that σ̃ is not constant
        let th: Vec<f64> = (0..n)
            .map(|i| {
                let u = i as f64 / n as f64;
                std::f64::consts::TAU * (u + 0.1 * (std::f64::consts::TAU * u).sin())
            })
            .collect();
        let k = Array2::from_shape_fn((n, n), |(i, j)| (-(2.0 - 2.0 * (th[i] - th[j]).cos()) / eps).exp());
        normalize(&KernelBundle { kernel: KernelMatrix::Dense(k), epsilon: eps, q: 1, k_nn: None }).unwrap()
    }

    #[test]
    fn uniform_kernel_is_rank_one() {
        let k = KernelBundle { kernel: KernelMatrix::Dense(Array2::<f64>::from_elem((5, 5), 0.7)), epsilon: 1.0, q: 1, k_nn: None };
        let m = normalize(&k).unwrap();
        let s = eigendecompose(&m, 3).unwrap();
        assert!((s.lambdas[0] - 1.0).abs() < 1e-12);
        assert!(s.lambdas.iter().skip(1).all(|l| l.abs() < 1e-12));
        assert_eq!(s.etas.to_vec(), vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = (-1.0f64).exp();
        let k = KernelBundle { kernel: KernelMatrix::Dense(arr2(&[[1.0, a], [a, 1.0]])), epsilon: 1.0, q: 1, k_nn: None };
        let s = eigendecompose(&normalize(&k).unwrap(), 1).unwrap();
        assert!((s.lambdas[0] - 1.0).abs() < 1e-12);
        assert!((s.lambdas[1] - (1.0 - a) / (1.0 + a)).abs() < 1e-12);
    }

    #[test]
    fn disconnected_kernel_rejected() {
        let k = arr2(&[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let m = normalize(&KernelBundle { kernel: KernelMatrix::Dense(k), epsilon: 1.0, q: 1, k_nn: None }).unwrap();
        assert!(matches!(eigendecompose(&m, 1), Err(Error::DegenerateUnitEigenvalue { .. })));
    }

    #[test]
    fn basis_invariants() {
        let m = circle_markov(300, 0.05);
        let s = eigendecompose(&m, 12).unwrap();
        assert!((s.lambdas[0] - 1.0).abs() < 1e-10);
        assert!(s.lambdas.windows(2).into_iter().all(|w| w[0] >= w[1]));
        assert!(s.residuals.iter().all(|&r| r < 1e-8));
        let g = s.gram();
        for i in 0..13 {
            for j in 0..13 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-8, "gram {i},{j}");
            }
        }
        let phi0 = s.phis.column(0);
        let (lo, hi) = phi0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        assert!((hi - lo) / hi.abs() < 1e-8);
        assert_eq!(s.etas[0], 0.0);
        assert_eq!(s.etas[1], 1.0);
        assert!(s.etas.windows(2).into_iter().all(|w| w[0] <= w[1]));
        assert!(s.lambdas.iter().all(|&l| l <= 1.0 + 1e-10));
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let m = circle_markov(400, 0.05);
        let dense = eigendecompose_with(&m, 8, &EigenOptions { solver: Solver::Dense, ..Default::default() }).unwrap();
        let lz = eigendecompose_with(&m, 8, &EigenOptions { solver: Solver::Lanczos, ..Default::default() }).unwrap();
        assert_eq!(lz.solver, Solver::Lanczos);
        for j in 0..9 {
            assert!((dense.lambdas[j] - lz.lambdas[j]).abs() < 1e-10);
        }
        // compare spans of near-degenerate pairs through projections
        for pair in [(1, 2), (3, 4), (5, 6), (7, 8)] {
            for &a in &[pair.0, pair.1] {
                let va = dense.phis.column(a).to_vec();
                let mut proj = 0.0;
                for &b in &[pair.0, pair.1] {
                    let c = dense.inner(&va, &lz.phis.column(b).to_vec());
                    proj += c * c;
                }
                assert!((proj - 1.0).abs() < 1e-6, "pair {pair:?}: {proj}");
            }
        }
    }

    #[test]
    fn nystrom_reproduces_samples() {
        let tr = random_traj(160, 2, 2);
        let d = delay_distance_matrix(&tr, 3).unwrap();
        let k = gaussian_kernel(&d, 1.0).unwrap();
        let m = normalize(&k).unwrap();
        let s = eigendecompose(&m, 5).unwrap();
        let rows = k.kernel.to_dense();
        let ext = nystrom_extend(&m, &s, &rows, &[0, 1, 2, 3, 4, 5]).unwrap();
        for i in 0..s.n_emb() {
            for j in 0..6 {
                assert!((ext[(i, j)] - s.phis[(i, j)]).abs() < 1e-8);
            }
        }
        // constant eigenfunction extends to its constant anywhere
        let probe = Array2::from_shape_fn((3, s.n_emb()), |(r, c)| ((r + 1) as f64 * 0.1 * c as f64).cos().abs() + 0.01);
        let ext = nystrom_extend(&m, &s, &probe, &[0]).unwrap();
        for r in 0..3 {
            assert!((ext[(r, 0)] / s.phis[(0, 0)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn nystrom_rejects_zero_eigenvalue() {
        let k = KernelBundle { kernel: KernelMatrix::Dense(Array2::from_elem((4, 4), 1.0)), epsilon: 1.0, q: 1, k_nn: None };
        let m = normalize(&k).unwrap();
        let s = eigendecompose(&m, 2).unwrap();
        let rows = Array2::from_elem((1, 4), 1.0);
        assert!(matches!(nystrom_extend(&m, &s, &rows, &[1]), Err(Error::SmallEigenvalue { index: 1, .. })));
        assert!(nystrom_extend(&m, &s, &rows, &[0]).is_ok());
    }

    #[test]
    fn sobolev_weight_formula() {
        let e = sobolev_weights::<f64>(&[1.0, 0.9, 0.9, 0.5, 0.0]);
        assert_eq!(e[0], 0.0);
        assert_eq!(e[1], 1.0);
        assert!((e[2] - 1.0).abs() < 1e-15);
        assert!((e[3] - (1.0 / (1.0 / 0.9 - 1.0))).abs() < 1e-12);
        assert!(e[4].is_infinite());
    }
}
