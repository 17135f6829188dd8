//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit QL iterations (the EISPACK tred2/tql2 pair).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues in ascending order with the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Array2<T>,
}

/// Full eigendecomposition of a symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen<T: Real>(a: &Array2<T>) -> Result<SymmetricEigen<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("matrix is {}x{}, not square", n, a.ncols())));
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let mut v: Vec<T> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            v.push(if j <= i { a[(i, j)] } else { a[(j, i)] });
        }
    }
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e);
    // tql2 rotates columns; work on the transpose so rotations touch rows
    let mut z = transpose(n, &v);
    drop(v);
    tql2(&mut d, &mut e, Some(&mut z))?;
    let mut vectors = Array2::zeros((n, n));
    for (k, row) in z.chunks_exact(n).enumerate() {
        for (i, &x) in row.iter().enumerate() {
            vectors[(i, k)] = x;
        }
    }
    Ok(SymmetricEigen { values: d, vectors })
}

fn transpose<T: Real>(n: usize, a: &[T]) -> Vec<T> {
    let mut t = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Householder reduction to tridiagonal form. On return `d` holds the diagonal,
/// `e[1..]` the subdiagonal, and `v` (row-major) the orthogonal transform.
fn tred2<T: Real>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for &dk in d.iter().take(i) {
            scale = scale + dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
                v[at(j, i)] = T::zero();
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk = *dk / scale;
                h = h + *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g = g + v[at(k, j)] * d[k];
                    e[k] = e[k] + v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] = v[at(k, j)] - (f * e[k] + g * d[k]);
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g = g + v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] = v[at(k, j)] - g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = T::zero();
    }
    v[at(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit QL on a symmetric tridiagonal matrix with diagonal `d` and
/// subdiagonal `e[1..]`. If `zt` is given it holds the transform row-wise
/// (row `k` is the `k`-th basis vector) and is rotated along. Eigenvalues come
/// back ascending in `d`, with `zt` rows permuted to match.
pub fn tql2<T: Real>(d: &mut [T], e: &mut [T], mut zt: Option<&mut [T]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    let max_iter = 60;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::NoConvergence {
                        iterations: iter,
                        residual: e[l].abs().as_f64(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..];
                        let zi1 = &mut hi[..n];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let hb = *b;
                            *b = s * *a + c * hb;
                            *a = c * *a - s * hb;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = T::zero();
    }

    // ascending selection sort, carrying basis rows
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if let Some(z) = zt.as_deref_mut() {
                let (lo, hi) = z.split_at_mut(k * n);
                lo[i * n..(i + 1) * n].swap_with_slice(&mut hi[..n]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = ndarray::arr2(&[[2.0f64, 1.0], [1.0, 2.0]]);
        let eig = symmetric_eigen(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 3.0).abs() < 1e-15);
        let v = eig.vectors.column(1);
        assert!((v[0].abs() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((v[0] - v[1]).abs() < 1e-15);
    }

    #[test]
    fn random_matrices_reconstruct() {
        for (n, seed) in [(1, 0), (2, 1), (7, 2), (40, 3), (97, 4)] {
            let a = random_symmetric(n, seed);
            let eig = symmetric_eigen(&a).unwrap();
            let v = &eig.vectors;
            let vtv = v.t().dot(v);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vtv[(i, j)] - want).abs() < 1e-12);
                }
            }
            let av = a.dot(v);
            for k in 0..n {
                for i in 0..n {
                    assert!((av[(i, k)] - eig.values[k] * v[(i, k)]).abs() < 1e-12);
                }
            }
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_and_zero_matrices() {
        let a = Array2::<f64>::eye(5);
        let eig = symmetric_eigen(&a).unwrap();
        assert!(eig.values.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        let z = Array2::<f64>::zeros((4, 4));
        let eig = symmetric_eigen(&z).unwrap();
        assert!(eig.values.iter().all(|&l| l == 0.0));
        let ones = Array2::<f64>::from_elem((6, 6), 1.0);
        let eig = symmetric_eigen(&ones).unwrap();
        assert!((eig.values[5] - 6.0).abs() < 1e-13);
        assert!(eig.values[..5].iter().all(|l| l.abs() < 1e-13));
    }

    #[test]
    fn single_precision() {
        let a = random_symmetric(20, 9).mapv(|x| x as f32);
        let eig = symmetric_eigen(&a).unwrap();
        let av = a.dot(&eig.vectors);
        for k in 0..20 {
            for i in 0..20 {
                assert!((av[(i, k)] - eig.values[k] * eig.vectors[(i, k)]).abs() < 1e-4);
            }
        }
    }
}
