//! Finite-difference generator matrix in the data-driven basis, the
//! diffusion-regularized Galerkin eigenproblem, and Dirichlet-energy ordering.

use ndarray::{s, Array1, Array2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{general_eigen, normalize_phase};
use crate::scalar::Real;
use crate::spectrum::MarkovSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdOrder {
    /// `(f_{n+1} − f_n)/Δt`, last entry 0.
    FirstForward,
    /// `(f_{n+1} − f_{n−1})/(2Δt)`, both end entries 0.
    SecondCentral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdScheme<T> {
    pub order: FdOrder,
    pub dt: T,
}

impl<T: Real> FdScheme<T> {
    pub fn new(order: FdOrder, dt: T) -> Result<Self> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        Ok(FdScheme { order, dt })
    }

    pub fn forward(dt: T) -> Result<Self> {
        Self::new(FdOrder::FirstForward, dt)
    }

    pub fn central(dt: T) -> Result<Self> {
        Self::new(FdOrder::SecondCentral, dt)
    }

    /// Samples whose stencil is complete.
    pub fn interior(&self, n: usize) -> std::ops::Range<usize> {
        match self.order {
            FdOrder::FirstForward => 0..n.saturating_sub(1),
            FdOrder::SecondCentral => 1..n.saturating_sub(1),
        }
    }
}

/// How incomplete stencils enter inner products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Boundary entries are 0 and stay in the sum.
    #[default]
    Zero,
    /// Boundary samples are dropped from the sum.
    Trim,
}

pub fn fd_apply<T: Real>(f: &[T], scheme: &FdScheme<T>) -> Result<Vec<T>> {
    let n = f.len();
    if n < 3 {
        return Err(Error::Shape(format!("need at least 3 samples, got {n}")));
    }
    let mut out = vec![T::zero(); n];
    match scheme.order {
        FdOrder::FirstForward => {
            for i in 0..n - 1 {
                out[i] = (f[i + 1] - f[i]) / scheme.dt;
            }
        }
        FdOrder::SecondCentral => {
            let h2 = scheme.dt + scheme.dt;
            for i in 1..n - 1 {
                out[i] = (f[i + 1] - f[i - 1]) / h2;
            }
        }
    }
    Ok(out)
}

/// `V_ij = ⟨φ_i, V_Δt φ_j⟩` for `i, j = 0..=m`. Row and column 0 belong to the
/// constant eigenfunction and are kept for inspection only.
pub fn generator_matrix<T: Real>(
    spectrum: &MarkovSpectrum<T>,
    scheme: &FdScheme<T>,
    m: usize,
    antisymmetrize: bool,
    boundary: Boundary,
) -> Result<Array2<T>> {
    if m < 1 || m > spectrum.m() {
        return Err(Error::param("m", format!("must be in 1..={}, got {m}", spectrum.m())));
    }
    let n = spectrum.n_emb();
    let range = match boundary {
        Boundary::Zero => 0..n,
        Boundary::Trim => scheme.interior(n),
    };
    let count = T::from_usize_lossy(range.len());
    let phis = spectrum.phis.slice(s![.., 0..=m]);
    let mut weighted = Array2::<T>::zeros((range.len(), m + 1));
    let mut derived = Array2::<T>::zeros((range.len(), m + 1));
    for j in 0..=m {
        let col = phis.column(j).to_vec();
        let dcol = fd_apply(&col, scheme)?;
        for (r, idx) in range.clone().enumerate() {
            weighted[(r, j)] = col[idx] * spectrum.weights[idx];
            derived[(r, j)] = dcol[idx];
        }
    }
    let mut v = weighted.t().dot(&derived);
    v.mapv_inplace(|x| x / count);
    if antisymmetrize {
        let vt = v.t().to_owned();
        let half = T::lit(0.5);
        v.zip_mut_with(&vt, |a, &b| *a = (*a - b) * half);
    }
    Ok(v)
}

/// The block acting on `φ_1..φ_m`.
pub fn galerkin_block<T: Real>(v_full: &Array2<T>) -> Array2<T> {
    v_full.slice(s![1.., 1..]).to_owned()
}

/// `A_ij = V_ij/η_j − θδ_ij`, `B = diag(1/η_i)`, for an `m × m` block and
/// weights `η_1..η_m`.
pub fn build_galerkin<T: Real>(
    v: &Array2<T>,
    etas: &[T],
    theta: T,
) -> Result<(Array2<T>, Array2<T>)> {
    let m = v.nrows();
    if v.ncols() != m || etas.len() != m {
        return Err(Error::Shape(format!(
            "V is {}x{} with {} weights",
            v.nrows(),
            v.ncols(),
            etas.len()
        )));
    }
    if !(theta >= T::zero() && theta.is_finite()) {
        return Err(Error::param("theta", "must be nonnegative"));
    }
    if let Some(j) = etas.iter().position(|&e| !(e > T::zero() && e.is_finite())) {
        return Err(Error::param("etas", format!("weight {} is {} (must be positive and finite)", j + 1, etas[j])));
    }
    let a = Array2::from_shape_fn((m, m), |(i, j)| {
        v[(i, j)] / etas[j] - if i == j { theta } else { T::zero() }
    });
    let b = Array2::from_shape_fn((m, m), |(i, j)| if i == j { T::one() / etas[i] } else { T::zero() });
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair<T> {
    pub gamma: Complex<T>,
    /// Unit norm, first largest-modulus component real and positive.
    pub c: Array1<Complex<T>>,
}

/// Solves `A c = γ B c` through `B⁻¹A c = γ c`.
pub fn solve_regularized<T: Real>(a: &Array2<T>, b: &Array2<T>) -> Result<Vec<Eigenpair<T>>> {
    let m = a.nrows();
    if a.dim() != b.dim() || a.ncols() != m {
        return Err(Error::Shape("A and B must be square and equal in size".into()));
    }
    for i in 0..m {
        for j in 0..m {
            let bij = b[(i, j)];
            if (i == j && !(bij > T::zero() && bij.is_finite())) || (i != j && bij != T::zero()) {
                return Err(Error::param("B", "must be diagonal with positive entries"));
            }
        }
    }
    let mat = Array2::from_shape_fn((m, m), |(i, j)| a[(i, j)] / b[(i, i)]);
    let eig = general_eigen(&mat)?;
    Ok(eig
        .values
        .into_iter()
        .enumerate()
        .map(|(k, gamma)| Eigenpair {
            gamma,
            c: eig.vectors.column(k).to_owned(),
        })
        .collect())
}

/// Galerkin solutions sorted by Dirichlet energy.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSolution<T> {
    /// `(m + 1) × (m + 1)`, index 0 is the constant eigenfunction.
    pub v_mat: Array2<T>,
    pub theta: T,
    pub a_mat: Array2<T>,
    pub b_mat: Array2<T>,
    pub gammas: Vec<Complex<T>>,
    /// Column `j` holds `c_j` (coefficients on `φ_k/η_k`).
    pub coeffs: Array2<Complex<T>>,
    /// Column `j` holds the unit-norm coefficients of `z_j` on `φ_1..φ_m`.
    pub phi_coeffs: Array2<Complex<T>>,
    pub energies: Vec<T>,
    /// `|Re γ_j + θ E_j|`.
    pub residuals: Vec<T>,
    /// θ = 0 leaves the problem without diffusion.
    pub zero_diffusion: bool,
}

impl<T: Real> GeneratorSolution<T> {
    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// `z_j(n) = Σ_k a_jk φ_k(n)` on the embedded samples.
    pub fn reconstruct(&self, spectrum: &MarkovSpectrum<T>, j: usize) -> Vec<Complex<T>> {
        let m = self.phi_coeffs.nrows();
        (0..spectrum.n_emb())
            .map(|n| {
                (0..m)
                    .map(|k| self.phi_coeffs[(k, j)] * spectrum.phis[(n, k + 1)])
                    .fold(Complex::new(T::zero(), T::zero()), |acc, x| acc + x)
            })
            .collect()
    }

    /// `‖V + Vᵀ‖_F / ‖V‖_F` over the Galerkin block.
    pub fn skew_residual(&self) -> T {
        skew_residual(&galerkin_block(&self.v_mat))
    }
}

pub fn skew_residual<T: Real>(v: &Array2<T>) -> T {
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            let s = v[(i, j)] + v[(j, i)];
            num = num + s * s;
            den = den + v[(i, j)] * v[(i, j)];
        }
    }
    (num / den).sqrt()
}

/// Energy `E = Σ η_k |a_k|² / Σ |a_k|²` with `a_k = c_k/η_k`, then a stable
/// ascending sort.
pub fn dirichlet_order<T: Real>(
    solutions: Vec<Eigenpair<T>>,
    etas: &[T],
    theta: T,
) -> Result<(Vec<Eigenpair<T>>, Vec<Array1<Complex<T>>>, Vec<T>, Vec<T>)> {
    if solutions.is_empty() {
        return Err(Error::param("solutions", "empty"));
    }
    let mut rows: Vec<(T, Eigenpair<T>, Array1<Complex<T>>)> = solutions
        .into_iter()
        .map(|p| {
            let mut a: Vec<Complex<T>> = p.c.iter().zip(etas).map(|(&c, &e)| c / e).collect();
            normalize_phase(&mut a);
            let num: T = a.iter().zip(etas).map(|(z, &e)| z.norm_sqr() * e).sum();
            let den: T = a.iter().map(|z| z.norm_sqr()).sum();
            (num / den, p, Array1::from(a))
        })
        .collect();
    rows.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let energies: Vec<T> = rows.iter().map(|r| r.0).collect();
    let residuals = rows
        .iter()
        .map(|(e, p, _)| (p.gamma.re + theta * *e).abs())
        .collect();
    let phi = rows.iter().map(|r| r.2.clone()).collect();
    let pairs = rows.into_iter().map(|r| r.1).collect();
    Ok((pairs, phi, energies, residuals))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GalerkinOptions<T> {
    pub m: usize,
    pub theta: T,
    pub order: FdOrder,
    pub antisymmetrize: bool,
    pub boundary: Boundary,
}

impl<T: Real> Default for GalerkinOptions<T> {
    fn default() -> Self {
        GalerkinOptions {
            m: 50,
            theta: T::lit(1e-4),
            order: FdOrder::FirstForward,
            antisymmetrize: false,
            boundary: Boundary::Zero,
        }
    }
}

/// Full chain: generator matrix, Galerkin assembly, eigensolve, ordering.
pub fn solve_generator<T: Real>(
    spectrum: &MarkovSpectrum<T>,
    dt: T,
    opts: &GalerkinOptions<T>,
) -> Result<GeneratorSolution<T>> {
    let scheme = FdScheme::new(opts.order, dt)?;
    let v_mat = generator_matrix(spectrum, &scheme, opts.m, opts.antisymmetrize, opts.boundary)?;
    let etas: Vec<T> = spectrum.etas.iter().skip(1).take(opts.m).copied().collect();
    let (a_mat, b_mat) = build_galerkin(&galerkin_block(&v_mat), &etas, opts.theta)?;
    let sols = solve_regularized(&a_mat, &b_mat)?;
    let (pairs, phi, energies, residuals) = dirichlet_order(sols, &etas, opts.theta)?;
    let m = opts.m;
    let mut coeffs = Array2::from_elem((m, pairs.len()), Complex::new(T::zero(), T::zero()));
    let mut phi_coeffs = coeffs.clone();
    for (j, (p, a)) in pairs.iter().zip(&phi).enumerate() {
        coeffs.column_mut(j).assign(&p.c);
        phi_coeffs.column_mut(j).assign(a);
    }
    Ok(GeneratorSolution {
        v_mat,
        theta: opts.theta,
        a_mat,
        b_mat,
        gammas: pairs.iter().map(|p| p.gamma).collect(),
        coeffs,
        phi_coeffs,
        energies,
        residuals,
        zero_diffusion: opts.theta == T::zero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fd_constant_and_ramp() {
        let dt = 0.01;
        for order in [FdOrder::FirstForward, FdOrder::SecondCentral] {
            let s = FdScheme::new(order, dt).unwrap();
            assert!(fd_apply(&[3.0; 10], &s).unwrap().iter().all(|&v| v == 0.0));
        }
        let ramp: Vec<f64> = (0..10).map(|n| n as f64 * dt).collect();
        let d = fd_apply(&ramp, &FdScheme::forward(dt).unwrap()).unwrap();
        for &v in &d[..9] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(d[9], 0.0);
        let d = fd_apply(&ramp, &FdScheme::central(dt).unwrap()).unwrap();
        assert_eq!((d[0], d[9]), (0.0, 0.0));
        assert!(fd_apply(&[1.0, 2.0], &FdScheme::forward(dt).unwrap()).is_err());
        assert!(FdScheme::forward(0.0).is_err());
    }

    fn sine_error(order: FdOrder, dt: f64) -> f64 {
        let n = (10.0 / dt) as usize;
        let f: Vec<f64> = (0..n).map(|k| (k as f64 * dt).sin()).collect();
        let s = FdScheme::new(order, dt).unwrap();
        let d = fd_apply(&f, &s).unwrap();
        s.interior(n)
            .map(|k| (d[k] - (k as f64 * dt).cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn fd_sine_accuracy_and_rates() {
        assert!(sine_error(FdOrder::SecondCentral, 0.01) < 2e-5);
        let r1 = sine_error(FdOrder::FirstForward, 0.01) / sine_error(FdOrder::FirstForward, 0.005);
        let r2 = sine_error(FdOrder::SecondCentral, 0.01) / sine_error(FdOrder::SecondCentral, 0.005);
        assert!((r1 - 2.0).abs() < 0.1, "{r1}");
        assert!((r2 - 4.0).abs() < 0.1, "{r2}");
    }

    #[test]
    fn galerkin_assembly_examples() {
        let (a, b) = build_galerkin(&Array2::<f64>::zeros((3, 3)), &[1.0, 2.0, 3.0], 0.0).unwrap();
        assert!(a.iter().all(|&x| x == 0.0));
        assert_eq!(b[(2, 2)], 1.0 / 3.0);
        let (a, b) = build_galerkin(&arr2(&[[0.0]]), &[1.0], 1e-4).unwrap();
        assert_eq!(a[(0, 0)], -1e-4);
        assert_eq!(b[(0, 0)], 1.0);
        assert!(build_galerkin(&arr2(&[[0.0]]), &[0.0], 1e-4).is_err());
        assert!(build_galerkin(&arr2(&[[0.0]]), &[f64::INFINITY], 1e-4).is_err());
    }

    #[test]
    fn rotation_generator_pairs() {
        let a = arr2(&[[0.0f64, 1.0], [-1.0, 0.0]]);
        let sols = solve_regularized(&a, &Array2::eye(2)).unwrap();
        let r = 0.5f64.sqrt();
        for p in &sols {
            let sign = p.gamma.im.signum();
            assert!((p.gamma - c(0.0, sign)).norm() < 1e-10);
            assert!((p.c[0] - c(r, 0.0)).norm() < 1e-10);
            assert!((p.c[1] - c(0.0, sign * r)).norm() < 1e-10);
        }
        let theta = 1e-4;
        let sols = solve_regularized(&(Array2::<f64>::eye(4) * -theta), &Array2::eye(4)).unwrap();
        assert!(sols.iter().all(|p| (p.gamma - c(-theta, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn idealized_block_diagonal_case() {
        // V = blockdiag(ω_k J) is diagonal over ℂ with entries ±iω_k
        let theta = 1e-3;
        let omegas = [1.0, 2.0];
        let etas = [1.0, 1.0, 3.5, 3.5];
        let mut v = Array2::<f64>::zeros((4, 4));
        for (b, &w) in omegas.iter().enumerate() {
            v[(2 * b, 2 * b + 1)] = w;
            v[(2 * b + 1, 2 * b)] = -w;
        }
        let (a, bm) = build_galerkin(&v, &etas, theta).unwrap();
        let sols = solve_regularized(&a, &bm).unwrap();
        let (pairs, _, energies, residuals) = dirichlet_order(sols, &etas, theta).unwrap();
        let want = [
            c(-theta, 1.0),
            c(-theta, -1.0),
            c(-theta * 3.5, 2.0),
            c(-theta * 3.5, -2.0),
        ];
        for w in want {
            assert!(pairs.iter().any(|p| (p.gamma - w).norm() < 1e-12), "{w}");
        }
        for (p, &e) in pairs.iter().zip(&energies) {
            let eta = if p.gamma.im.abs() < 1.5 { 1.0 } else { 3.5 };
            assert!((e - eta).abs() < 1e-12);
        }
        assert!(residuals.iter().all(|&r| r < 1e-12));
        assert!(energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ordering_contract() {
        let etas = [0.5, 0.2];
        let sols = vec![
            Eigenpair { gamma: c(-0.5, 0.0), c: Array1::from(vec![c(1.0, 0.0), c(0.0, 0.0)]) },
            Eigenpair { gamma: c(-0.2, 0.0), c: Array1::from(vec![c(0.0, 0.0), c(1.0, 0.0)]) },
        ];
        let (pairs, _, e, _) = dirichlet_order(sols.clone(), &etas, 1.0).unwrap();
        assert_eq!(e, vec![0.2, 0.5]);
        assert_eq!(pairs[0].gamma, c(-0.2, 0.0));
        let (pairs, _, _, _) = dirichlet_order(sols[..1].to_vec(), &etas, 1.0).unwrap();
        assert_eq!(pairs[0], sols[0]);
        assert!(dirichlet_order(Vec::<Eigenpair<f64>>::new(), &etas, 1.0).is_err());
    }
}
