use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::dynamics::ObservedTrajectory;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Steps between direct re-evaluations of a window sum along a diagonal.
const REANCHOR: usize = 128;
/// Diagonals computed per parallel batch before scattering into the matrix.
const BATCH: usize = 256;

/// Squared delay-coordinate pseudodistances
/// `d²(i, j) = (1/Q) Σ_{q<Q} ‖F_{i+q} − F_{j+q}‖²` over `N − Q + 1` windows.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDistanceMatrix<T> {
    q: usize,
    entries: Array2<T>,
}

impl<T: Real> DelayDistanceMatrix<T> {
    /// Wraps a precomputed matrix after checking symmetry, sign and diagonal.
    pub fn from_entries(q: usize, entries: Array2<T>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::Shape("distance matrix must be square".into()));
        }
        for i in 0..n {
            if entries[(i, i)] != T::zero() {
                return Err(Error::Shape(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = entries[(i, j)];
                if !(v >= T::zero()) || v != entries[(j, i)] {
                    return Err(Error::Shape(format!("entry ({i}, {j}) is negative or asymmetric")));
                }
            }
        }
        Ok(DelayDistanceMatrix { q, entries })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_emb(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<T> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }
}

fn sqdist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

struct Rows<'a, T> {
    data: &'a [T],
    d: usize,
}

impl<T: Real> Rows<'_, T> {
    fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

fn contiguous<T: Real>(a: ArrayView2<'_, T>) -> Vec<T> {
    a.iter().copied().collect()
}

/// Window sums `Q·d²(a0 + t, b0 + t)` for `t = 0..len`, advanced by the sliding
/// recursion and re-anchored periodically.
fn walk_diagonal<T: Real>(
    x: &Rows<'_, T>,
    y: &Rows<'_, T>,
    a0: usize,
    b0: usize,
    len: usize,
    q: usize,
    out: &mut Vec<T>,
) {
    out.clear();
    let direct = |a: usize, b: usize| -> T { (0..q).map(|k| sqdist(x.row(a + k), y.row(b + k))).sum() };
    let mut s = T::zero();
    for t in 0..len {
        if t % REANCHOR == 0 {
            s = direct(a0 + t, b0 + t);
        } else {
            let a = a0 + t - 1;
            let b = b0 + t - 1;
            s = s - sqdist(x.row(a), y.row(b)) + sqdist(x.row(a + q), y.row(b + q));
        }
        out.push(s);
    }
}

fn check_q(n: usize, q: usize) -> Result<()> {
    if q < 1 || q >= n {
        return Err(Error::param("q", format!("must satisfy 1 <= Q <= N - 1 = {}, got {q}", n.saturating_sub(1))));
    }
    Ok(())
}

/// Builds the delay distance matrix with the along-diagonal recursion.
pub fn delay_distance_matrix<T: Real>(
    traj: &ObservedTrajectory<T>,
    q: usize,
) -> Result<DelayDistanceMatrix<T>> {
    let n = traj.len();
    check_q(n, q)?;
    let n_emb = n - q + 1;
    let data = contiguous(traj.samples().view());
    let rows = Rows { data: &data, d: traj.dim() };
    let qf = T::from_usize_lossy(q);
    let mut entries = Array2::<T>::zeros((n_emb, n_emb));

    let mut start = 1;
    while start < n_emb {
        let end = (start + BATCH).min(n_emb);
        let diags: Vec<Vec<T>> = (start..end)
            .into_par_iter()
            .map(|off| {
                let mut buf = Vec::with_capacity(n_emb - off);
                walk_diagonal(&rows, &rows, 0, off, n_emb - off, q, &mut buf);
                buf
            })
            .collect();
        for (off, diag) in (start..end).zip(diags) {
            for (i, s) in diag.into_iter().enumerate() {
                let v = (s / qf).max(T::zero());
                entries[(i, i + off)] = v;
                entries[(i + off, i)] = v;
            }
        }
        start = end;
    }
    Ok(DelayDistanceMatrix { q, entries })
}

/// Squared delay distances from every window of `query` to every window of
/// `reference`; rows index query windows.
pub fn cross_distance_matrix<T: Real>(
    query: &ObservedTrajectory<T>,
    reference: &ObservedTrajectory<T>,
    q: usize,
) -> Result<Array2<T>> {
    if query.dim() != reference.dim() {
        return Err(Error::Shape(format!(
            "observation dimensions differ: {} vs {}",
            query.dim(),
            reference.dim()
        )));
    }
    check_q(query.len() + 1, q)?;
    check_q(reference.len() + 1, q)?;
    let na = query.len() - q + 1;
    let nb = reference.len() - q + 1;
    let xa = contiguous(query.samples().view());
    let xb = contiguous(reference.samples().view());
    let x = Rows { data: &xa, d: query.dim() };
    let y = Rows { data: &xb, d: reference.dim() };
    let qf = T::from_usize_lossy(q);
    let mut out = Array2::<T>::zeros((na, nb));
    // diagonals b − a = off for off in −(na−1)..nb
    let offsets: Vec<isize> = (-(na as isize - 1)..nb as isize).collect();
    for chunk in offsets.chunks(BATCH) {
        let diags: Vec<(usize, usize, Vec<T>)> = chunk
            .par_iter()
            .map(|&off| {
                let (a0, b0) = if off >= 0 { (0, off as usize) } else { ((-off) as usize, 0) };
                let len = (na - a0).min(nb - b0);
                let mut buf = Vec::with_capacity(len);
                walk_diagonal(&x, &y, a0, b0, len, q, &mut buf);
                (a0, b0, buf)
            })
            .collect();
        for (a0, b0, diag) in diags {
            for (t, s) in diag.into_iter().enumerate() {
                out[(a0 + t, b0 + t)] = (s / qf).max(T::zero());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::random_traj;

    fn brute(tr: &ObservedTrajectory<f64>, q: usize) -> Array2<f64> {
        let n_emb = tr.len() - q + 1;
        Array2::from_shape_fn((n_emb, n_emb), |(i, j)| {
            let mut s = 0.0;
            for k in 0..q {
                for c in 0..tr.dim() {
                    let d = tr.samples()[(i + k, c)] - tr.samples()[(j + k, c)];
                    s += d * d;
                }
            }
            s / q as f64
        })
    }

    fn assert_rel_close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) {
        assert_eq!(a.dim(), b.dim());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * y.abs().max(1e-300) || (x - y).abs() < 1e-14, "{x} vs {y}");
        }
    }

    #[test]
    fn single_delay_is_pairwise() {
        let tr = random_traj(20, 2, 1);
        let d = delay_distance_matrix(&tr, 1).unwrap();
        assert_eq!(d.n_emb(), 20);
        for i in 0..20 {
            for j in 0..20 {
                let want = sqdist(tr.row(i).as_slice().unwrap(), tr.row(j).as_slice().unwrap());
                assert!((d.get(i, j) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_brute_force() {
        let tr = random_traj(50, 3, 2);
        let d = delay_distance_matrix(&tr, 7).unwrap();
        assert_eq!(d.n_emb(), 44);
        assert_rel_close(d.entries(), &brute(&tr, 7), 1e-10);
        for i in 0..44 {
            assert_eq!(d.get(i, i), 0.0);
        }
    }

    #[test]
    fn long_diagonals_stay_accurate() {
        let tr = random_traj(700, 2, 3);
        let d = delay_distance_matrix(&tr, 40).unwrap();
        assert_rel_close(d.entries(), &brute(&tr, 40), 1e-10);
    }

    #[test]
    fn shift_identity() {
        let tr = random_traj(60, 2, 4);
        let q = 9;
        let d = brute(&tr, q);
        let g = |i: usize, j: usize| sqdist(tr.row(i).as_slice().unwrap(), tr.row(j).as_slice().unwrap());
        let qf = q as f64;
        for i in 0..d.nrows() - 1 {
            for j in 0..d.nrows() - 1 {
                let upd = qf * d[(i, j)] - g(i, j) + g(i + q, j + q);
                assert!((qf * d[(i + 1, j + 1)] - upd).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn q_range_checked() {
        let tr = random_traj(10, 1, 5);
        assert!(delay_distance_matrix(&tr, 0).is_err());
        assert!(delay_distance_matrix(&tr, 10).is_err());
        assert_eq!(delay_distance_matrix(&tr, 9).unwrap().n_emb(), 2);
    }

    #[test]
    fn cross_matches_square_on_same_data() {
        let tr = random_traj(80, 2, 6);
        let q = 5;
        let sq = delay_distance_matrix(&tr, q).unwrap();
        let cr = cross_distance_matrix(&tr, &tr, q).unwrap();
        assert_rel_close(&cr, sq.entries(), 1e-10);
        let head = tr.slice(0..30).unwrap();
        let cr = cross_distance_matrix(&head, &tr, q).unwrap();
        assert_eq!(cr.dim(), (26, 76));
        for i in 0..26 {
            for j in 0..76 {
                assert!((cr[(i, j)] - sq.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn from_entries_validates() {
        let good = ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        assert!(DelayDistanceMatrix::from_entries(1, good).is_ok());
        let bad = ndarray::arr2(&[[0.0, 1.0], [2.0, 0.0]]);
        assert!(DelayDistanceMatrix::from_entries(1, bad).is_err());
    }
}
