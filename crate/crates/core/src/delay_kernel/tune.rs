use serde::{Deserialize, Serialize};

use super::distance::DelayDistanceMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Upper bound on the number of off-diagonal pairs visited by the tuner.
pub const MAX_TUNING_PAIRS: usize = 1 << 22;
pub const DEFAULT_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRow<T> {
    pub epsilon: T,
    /// Mean kernel value `S(ε)`.
    pub kernel_sum: T,
    /// Forward log-log slope to the next grid point; `NaN` on the last row.
    pub slope: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTuning<T> {
    pub epsilon: T,
    pub max_slope: T,
    /// Set when `S(ε)` does not vary over the grid.
    pub flat: bool,
    pub table: Vec<BandwidthRow<T>>,
    /// Off-diagonal pairs used to estimate `S`.
    pub sampled_pairs: usize,
}

/// Off-diagonal upper-triangle entries, every `stride`-th in row-major order.
fn sample_pairs<T: Real>(d: &DelayDistanceMatrix<T>) -> (Vec<T>, usize) {
    let n = d.n_emb();
    let total = n * n.saturating_sub(1) / 2;
    let mut stride = total.div_ceil(MAX_TUNING_PAIRS).max(1);
    if stride > 1 && stride.is_multiple_of(2) {
        stride += 1;
    }
    let e = d.entries();
    let mut out = Vec::with_capacity(total / stride + 1);
    let mut c = 0usize;
    for i in 0..n {
        let row = e.row(i);
        // first j > i whose running index is a multiple of the stride
        let skip = (stride - c % stride) % stride;
        let mut j = i + 1 + skip;
        while j < n {
            out.push(row[j]);
            j += stride;
        }
        c += n - i - 1;
    }
    (out, stride)
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    if v.is_empty() {
        return T::zero();
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distances"));
    *m
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<T> = (0..n)
        .map(|t| (a + (b - a) * T::from_usize_lossy(t) / T::from_usize_lossy(n - 1)).exp())
        .collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

/// 64 log-spaced points over `[1e-3, 1e3] × median(d²)`.
pub fn default_grid<T: Real>(d: &DelayDistanceMatrix<T>) -> Vec<T> {
    let (pairs, _) = sample_pairs(d);
    let mut scale = median(pairs);
    if !(scale > T::zero()) {
        scale = T::one();
    }
    log_grid(
        T::lit(1e-3) * scale,
        T::lit(1e3) * scale,
        DEFAULT_GRID_POINTS,
    )
}

/// Chooses ε where the log-log slope of the mean kernel value is steepest.
pub fn tune_bandwidth<T: Real>(d: &DelayDistanceMatrix<T>, grid: &[T]) -> Result<BandwidthTuning<T>> {
    if grid.len() < 2 {
        return Err(Error::param("grid", "needs at least two points"));
    }
    if grid.iter().any(|&e| !(e > T::zero() && e.is_finite())) {
        return Err(Error::param("grid", "all bandwidths must be positive"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("grid", "must be strictly increasing"));
    }
    let n = d.n_emb();
    let (pairs, _) = sample_pairs(d);
    let nf = T::from_usize_lossy(n);
    let sums: Vec<T> = grid
        .iter()
        .map(|&eps| {
            let off = if pairs.is_empty() {
                T::zero()
            } else {
                let s: f64 = pairs.iter().map(|&v| (-v / eps).exp().as_f64()).sum();
                T::lit(s / pairs.len() as f64)
            };
            (T::one() + (nf - T::one()) * off) / nf
        })
        .collect();
    let mut table = Vec::with_capacity(grid.len());
    let mut best = 0;
    let mut max_slope = T::neg_infinity();
    for t in 0..grid.len() {
        let slope = if t + 1 < grid.len() {
            (sums[t + 1].ln() - sums[t].ln()) / (grid[t + 1].ln() - grid[t].ln())
        } else {
            T::nan()
        };
        if t + 1 < grid.len() && slope > max_slope {
            max_slope = slope;
            best = t;
        }
        table.push(BandwidthRow {
            epsilon: grid[t],
            kernel_sum: sums[t],
            slope,
        });
    }
    let flat = !(max_slope.abs() > T::lit(1e-12));
    if flat {
        best = 0;
    }
    Ok(BandwidthTuning {
        epsilon: grid[best],
        max_slope,
        flat,
        table,
        sampled_pairs: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn two_clusters(n: usize, c: f64) -> DelayDistanceMatrix<f64> {
        let d = Array2::from_shape_fn((n, n), |(i, j)| if (i < n / 2) == (j < n / 2) { 0.0 } else { c });
        DelayDistanceMatrix::from_entries(1, d).unwrap()
    }

    #[test]
    fn all_zero_distances_are_flat() {
        let d = DelayDistanceMatrix::from_entries(1, Array2::<f64>::zeros((6, 6))).unwrap();
        let grid = log_grid(0.1, 10.0, 5);
        let t = tune_bandwidth(&d, &grid).unwrap();
        assert!(t.flat);
        assert_eq!(t.epsilon, 0.1);
        assert!(t.table.iter().all(|r| r.kernel_sum == 1.0));
        assert_eq!(default_grid(&d).len(), 64);
    }

    #[test]
    fn degenerate_grid_rejected() {
        let d = two_clusters(4, 1.0);
        assert!(tune_bandwidth(&d, &[1.0]).is_err());
        assert!(tune_bandwidth(&d, &[1.0, -1.0]).is_err());
        assert!(tune_bandwidth(&d, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn two_clusters_follow_closed_form() {
        let n = 40;
        let c = 3.0;
        let d = two_clusters(n, c);
        let grid = log_grid(1e-2, 1e2, 81);
        let t = tune_bandwidth(&d, &grid).unwrap();
        // S(ε) = ½ + ½e^{−c/ε}
        let s = |e: f64| 0.5 + 0.5 * (-c / e).exp();
        let slopes: Vec<f64> = grid
            .windows(2)
            .map(|w| (s(w[1]).ln() - s(w[0]).ln()) / (w[1].ln() - w[0].ln()))
            .collect();
        let best = slopes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(t.epsilon, grid[best]);
        for (row, want) in t.table.iter().zip(&slopes) {
            assert!((row.slope - want).abs() < 1e-12);
        }
        // the continuous maximiser is ε ≈ 0.78c
        let ratio = t.epsilon / c;
        assert!(ratio > 0.5 && ratio < 1.2, "{ratio}");
    }

    #[test]
    fn circle_plateau() {
        let n = 400;
        let th: Vec<f64> = (0..n).map(|i| i as f64 * std::f64::consts::TAU / n as f64).collect();
        let d = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                0.0
            } else {
                2.0 - 2.0 * (th[i] - th[j]).cos()
            }
        });
        let d = DelayDistanceMatrix::from_entries(1, d).unwrap();
        let grid = log_grid(1e-4, 1e2, 121);
        let t = tune_bandwidth(&d, &grid).unwrap();
        // on a 1-manifold S(ε) ∝ ε^{1/2} between the sampling and curvature scales
        let in_plateau: Vec<f64> = t
            .table
            .iter()
            .filter(|r| (r.slope - 0.5).abs() < 0.05)
            .map(|r| r.epsilon)
            .collect();
        assert!(in_plateau.len() > 10);
        let lo = in_plateau.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = in_plateau.iter().cloned().fold(0.0, f64::max);
        assert!(t.epsilon >= lo && t.epsilon <= hi, "{} not in [{lo}, {hi}]", t.epsilon);
    }

    #[test]
    fn subsample_is_exact_for_small_matrices() {
        let d = two_clusters(10, 2.0);
        let (p, stride) = sample_pairs(&d);
        assert_eq!(stride, 1);
        assert_eq!(p.len(), 45);
    }
}
