//! Eigenpairs of small dense nonsymmetric matrices: Householder reduction to
//! Hessenberg form, complex shifted QR to Schur form, and back-substitution
//! for eigenvectors.

use ndarray::Array2;
use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct GeneralEigen<T> {
    pub values: Vec<Complex<T>>,
    /// Unit-norm eigenvectors as columns; the first component of largest
    /// modulus is real and positive.
    pub vectors: Array2<Complex<T>>,
}

pub fn general_eigen<T: Real>(a: &Array2<T>) -> Result<GeneralEigen<T>> {
    complex_eigen(&a.mapv(|x| Complex::new(x, T::zero())))
}

pub fn complex_eigen<T: Real>(a: &Array2<Complex<T>>) -> Result<GeneralEigen<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("matrix is {}x{}, not square", n, a.ncols())));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Shape("matrix has non-finite entries".into()));
    }
    let mut h = a.clone();
    let mut z = Array2::from_shape_fn((n, n), |(i, j)| if i == j { one() } else { Complex::zero() });
    hessenberg(&mut h, &mut z);
    schur(&mut h, &mut z)?;
    let values: Vec<Complex<T>> = (0..n).map(|i| h[(i, i)]).collect();
    let vectors = schur_vectors(&h, &z);
    Ok(GeneralEigen { values, vectors })
}

fn one<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

fn hessenberg<T: Real>(h: &mut Array2<Complex<T>>, q: &mut Array2<Complex<T>>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![Complex::zero(); n];
    for k in 0..n - 2 {
        let xnorm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<T>().sqrt();
        if xnorm == T::zero() {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if cabs(x0) == T::zero() { one() } else { x0 / cabs(x0) };
        let alpha = -phase * xnorm;
        for i in 0..n {
            v[i] = if i <= k { Complex::zero() } else { h[(i, k)] };
        }
        v[k + 1] = v[k + 1] - alpha;
        let vnorm = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<T>().sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for vi in v.iter_mut().skip(k + 1) {
            *vi = *vi / vnorm;
        }
        let two = T::lit(2.0);
        // H ← (I − 2vvᴴ) H
        for j in 0..n {
            let s: Complex<T> = (k + 1..n).map(|i| v[i].conj() * h[(i, j)]).sum();
            for i in k + 1..n {
                h[(i, j)] = h[(i, j)] - v[i] * s * two;
            }
        }
        // H ← H (I − 2vvᴴ), Q ← Q (I − 2vvᴴ)
        for m in [&mut *h, &mut *q] {
            for i in 0..n {
                let s: Complex<T> = (k + 1..n).map(|j| m[(i, j)] * v[j]).sum();
                for j in k + 1..n {
                    m[(i, j)] = m[(i, j)] - s * v[j].conj() * two;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex::zero();
        }
    }
}

/// Rotation `[c s; −s̄ c]` mapping `(x, y)` to `(r, 0)`.
fn givens<T: Real>(x: Complex<T>, y: Complex<T>) -> (T, Complex<T>) {
    let nx = cabs(x);
    let ny = cabs(y);
    if ny == T::zero() {
        return (T::one(), Complex::zero());
    }
    if nx == T::zero() {
        return (T::zero(), one());
    }
    let nrm = nx.hypot(ny);
    let phase = x / nx;
    (nx / nrm, phase * y.conj() / nrm)
}

fn wilkinson_shift<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let m = (a - d) * half;
    let disc = (m * m + b * c).sqrt();
    let mu1 = (a + d) * half + disc;
    let mu2 = (a + d) * half - disc;
    if cabs(mu1 - d) < cabs(mu2 - d) {
        mu1
    } else {
        mu2
    }
}

fn schur<T: Real>(h: &mut Array2<Complex<T>>, z: &mut Array2<Complex<T>>) -> Result<()> {
    let n = h.nrows();
    if n < 2 {
        return Ok(());
    }
    let eps = T::epsilon();
    let hnorm = h.iter().map(|x| cabs(*x)).fold(T::zero(), T::max);
    let small = T::min_positive_value() / eps;
    let max_iter = 30 * n;
    let mut hi = n - 1;
    let mut iter = 0;
    let mut total = 0;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let tst = cabs(h[(l - 1, l - 1)]) + cabs(h[(l, l)]);
            let tst = if tst == T::zero() { hnorm } else { tst };
            if cabs(h[(l, l - 1)]) <= eps * tst || cabs(h[(l, l - 1)]) <= small {
                h[(l, l - 1)] = Complex::zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_iter {
            return Err(Error::NoConvergence {
                iterations: total,
                residual: cabs(h[(hi, hi - 1)]).as_f64(),
            });
        }
        let mu = if iter % 11 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex::new(cabs(h[(hi, hi - 1)]) * T::lit(0.75), T::zero())
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        let mut x = h[(l, l)] - mu;
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let cc = Complex::new(c, T::zero());
            let col0 = if k > l { k - 1 } else { l };
            for j in col0..n {
                let h1 = h[(k, j)];
                let h2 = h[(k + 1, j)];
                h[(k, j)] = cc * h1 + s * h2;
                h[(k + 1, j)] = -s.conj() * h1 + cc * h2;
            }
            if k > l {
                h[(k + 1, k - 1)] = Complex::zero();
            }
            let row_end = (k + 2).min(hi);
            for i in 0..=row_end {
                let h1 = h[(i, k)];
                let h2 = h[(i, k + 1)];
                h[(i, k)] = h1 * cc + h2 * s.conj();
                h[(i, k + 1)] = -h1 * s + h2 * cc;
            }
            for i in 0..n {
                let z1 = z[(i, k)];
                let z2 = z[(i, k + 1)];
                z[(i, k)] = z1 * cc + z2 * s.conj();
                z[(i, k + 1)] = -z1 * s + z2 * cc;
            }
        }
    }
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = Complex::zero();
        }
    }
    Ok(())
}

fn schur_vectors<T: Real>(t: &Array2<Complex<T>>, z: &Array2<Complex<T>>) -> Array2<Complex<T>> {
    let n = t.nrows();
    let tnorm = t.iter().map(|x| cabs(*x)).fold(T::zero(), T::max);
    let floor = T::epsilon() * tnorm.max(T::min_positive_value());
    let mut out = Array2::zeros((n, n));
    let mut y = vec![Complex::<T>::zero(); n];
    for k in 0..n {
        y.iter_mut().for_each(|v| *v = Complex::zero());
        y[k] = one();
        let lam = t[(k, k)];
        for i in (0..k).rev() {
            let s: Complex<T> = (i + 1..=k).map(|j| t[(i, j)] * y[j]).sum();
            let mut den = t[(i, i)] - lam;
            if cabs(den) < floor {
                den = Complex::new(floor, T::zero());
            }
            y[i] = -s / den;
        }
        let mut x: Vec<Complex<T>> = (0..n)
            .map(|i| (0..=k).map(|j| z[(i, j)] * y[j]).sum())
            .collect();
        normalize_phase(&mut x);
        for (i, v) in x.into_iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    out
}

/// Unit Euclidean norm with the first component of largest modulus made real
/// and positive.
pub fn normalize_phase<T: Real>(x: &mut [Complex<T>]) {
    let nrm = x.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt();
    if nrm == T::zero() {
        return;
    }
    let mut best = 0;
    let mut best_abs = T::zero();
    let slack = T::one() + T::lit(1e3) * T::epsilon();
    for (i, v) in x.iter().enumerate() {
        let a = cabs(*v);
        if a > best_abs * slack {
            best = i;
            best_abs = a;
        }
    }
    let rot = x[best].conj() / (best_abs * nrm);
    for v in x.iter_mut() {
        *v = *v * rot;
    }
    x[best] = Complex::new(x[best].re, T::zero());
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn check_pairs(a: &Array2<f64>, eig: &GeneralEigen<f64>, tol: f64) {
        let ac = a.mapv(|x| Complex64::new(x, 0.0));
        for k in 0..a.nrows() {
            let v = eig.vectors.column(k);
            let av = ac.dot(&v);
            for i in 0..a.nrows() {
                assert!((av[i] - eig.values[k] * v[i]).norm() < tol, "pair {k}");
            }
            let nrm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            assert!((nrm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_generator() {
        let a = arr2(&[[0.0, 1.0], [-1.0, 0.0]]);
        let eig = general_eigen(&a).unwrap();
        let mut vals = eig.values.clone();
        vals.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap());
        assert!((vals[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((vals[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        let r = 0.5f64.sqrt();
        for k in 0..2 {
            let v = eig.vectors.column(k);
            let want_second = Complex64::new(0.0, eig.values[k].im.signum()) * r;
            assert!((v[0] - Complex64::new(r, 0.0)).norm() < 1e-12);
            assert!((v[1] - want_second).norm() < 1e-12);
        }
        check_pairs(&a, &eig, 1e-12);
    }

    #[test]
    fn random_real_matrices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 17, 50] {
            let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
            let eig = general_eigen(&a).unwrap();
            check_pairs(&a, &eig, 1e-10);
            let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
            let sum: Complex64 = eig.values.iter().sum();
            assert!((sum.re - trace).abs() < 1e-10 && sum.im.abs() < 1e-10);
            // conjugate pairing
            for v in &eig.values {
                let closest = eig
                    .values
                    .iter()
                    .map(|w| (w - v.conj()).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(closest < 1e-8);
            }
        }
    }

    #[test]
    fn diagonal_and_defective() {
        let a = arr2(&[[-1e-4, 0.0], [0.0, -1e-4]]);
        let eig = general_eigen(&a).unwrap();
        for v in &eig.values {
            assert!((v - Complex64::new(-1e-4, 0.0)).norm() < 1e-18);
        }
        let j = arr2(&[[2.0f64, 1.0], [0.0, 2.0]]);
        let eig = general_eigen(&j).unwrap();
        for v in &eig.values {
            assert!((v.re - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn skew_blocks() {
        let mut a = Array2::<f64>::zeros((6, 6));
        for (b, w) in [1.0, 2.0, 3.0].iter().enumerate() {
            a[(2 * b, 2 * b + 1)] = *w;
            a[(2 * b + 1, 2 * b)] = -*w;
            a[(2 * b, 2 * b)] = -0.1 * (b as f64 + 1.0);
            a[(2 * b + 1, 2 * b + 1)] = -0.1 * (b as f64 + 1.0);
        }
        let eig = general_eigen(&a).unwrap();
        check_pairs(&a, &eig, 1e-12);
        let mut ims: Vec<f64> = eig.values.iter().map(|v| v.im).collect();
        ims.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in ims.iter().zip([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
