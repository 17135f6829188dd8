//! Empirical checks: shift commutators, distance dispersion, eigenvalue pair
//! gaps, spectral peaks and phase lags.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::delay_kernel::{DelayDistanceMatrix, KernelMatrix};
use crate::scalar::Real;

/// `max_{i,j} |K(i+1, j+1) − K(i, j)|`, the max-norm of `UK − KU` for the
/// index shift `U` on interior samples.
pub fn shift_commutator<T: Real>(k: &KernelMatrix<T>) -> T {
    let n = k.n();
    match k {
        KernelMatrix::Dense(a) => {
            let mut worst = T::zero();
            for i in 0..n.saturating_sub(1) {
                let r0 = a.row(i);
                let r1 = a.row(i + 1);
                for j in 0..n - 1 {
                    worst = worst.max((r1[j + 1] - r0[j]).abs());
                }
            }
            worst
        }
        KernelMatrix::Sparse(_) => {
            let mut worst = T::zero();
            for i in 0..n.saturating_sub(1) {
                for j in 0..n - 1 {
                    worst = worst.max((k.get(i + 1, j + 1) - k.get(i, j)).abs());
                }
            }
            worst
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    pub std: f64,
    /// Coefficient of variation `std/mean`.
    pub cv: f64,
    pub pairs: usize,
}

/// Statistics of `d²(i, j)` over pairs with `j − i > min_separation`, visiting
/// at most about `max_pairs` of them on a regular stride.
pub fn distance_dispersion<T: Real>(
    d: &DelayDistanceMatrix<T>,
    min_separation: usize,
    max_pairs: usize,
) -> Dispersion {
    let n = d.n_emb();
    let total: usize = (0..n).map(|i| n.saturating_sub(i + min_separation + 1)).sum();
    let stride = total.div_ceil(max_pairs.max(1)).max(1);
    let e = d.entries();
    let (mut s1, mut s2, mut count) = (0.0, 0.0, 0usize);
    let mut c = 0usize;
    for i in 0..n {
        let start = i + min_separation + 1;
        if start >= n {
            break;
        }
        let skip = (stride - c % stride) % stride;
        let mut j = start + skip;
        while j < n {
            let v = e[(i, j)].as_f64();
            s1 += v;
            s2 += v * v;
            count += 1;
            j += stride;
        }
        c += n - start;
    }
    let mean = s1 / count.max(1) as f64;
    let var = (s2 / count.max(1) as f64 - mean * mean).max(0.0);
    Dispersion {
        mean,
        std: var.sqrt(),
        cv: var.sqrt() / mean,
        pairs: count,
    }
}

/// `|λ_{2k−1} − λ_{2k}| / λ_{2k−1}` for `k = 1..=pairs`.
pub fn pair_gaps<T: Real>(lambdas: &[T], pairs: usize) -> Vec<f64> {
    (1..=pairs)
        .take_while(|k| 2 * k < lambdas.len())
        .map(|k| {
            let a = lambdas[2 * k - 1].as_f64();
            let b = lambdas[2 * k].as_f64();
            (a - b).abs() / a
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub bin: usize,
    /// Angular frequency of the bin (rad per time unit).
    pub omega: f64,
    /// Bin spacing in angular frequency.
    pub resolution: f64,
    pub power: f64,
    /// Largest power outside the peak's immediate neighbourhood.
    pub runner_up: f64,
}

/// Dominant nonzero-frequency bin of the periodogram of a mean-removed series.
pub fn spectral_peak<T: Real>(series: &[T], dt: f64) -> SpectralPeak {
    let n = series.len();
    let mean = series.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = series
        .iter()
        .map(|v| Complex64::new(v.as_f64() - mean, 0.0))
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[..n / 2 + 1].iter().map(|z| z.norm_sqr()).collect();
    let (bin, &best) = power
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite power"))
        .expect("series of length >= 2");
    let runner_up = power
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(k, _)| k.abs_diff(bin) > 2)
        .map(|(_, &p)| p)
        .fold(0.0, f64::max);
    let resolution = std::f64::consts::TAU / (n as f64 * dt);
    SpectralPeak {
        bin,
        omega: bin as f64 * resolution,
        resolution,
        power: best,
        runner_up,
    }
}

/// Normalized cross-correlation of mean-removed series at lag `l`,
/// `Σ a(n) b(n + l)` over the overlap divided by the overlap norms.
pub fn cross_correlation<T: Real>(a: &[T], b: &[T], lag: isize) -> f64 {
    let n = a.len().min(b.len());
    let ma = a[..n].iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let mb = b[..n].iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let j = i as isize + lag;
        if j < 0 || j as usize >= n {
            continue;
        }
        let x = a[i].as_f64() - ma;
        let y = b[j as usize].as_f64() - mb;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Lag in `−max_lag..=max_lag` maximizing [`cross_correlation`].
pub fn peak_lag<T: Real>(a: &[T], b: &[T], max_lag: usize) -> (isize, f64) {
    let m = max_lag as isize;
    (-m..=m)
        .map(|l| (l, cross_correlation(a, b, l)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// `|Re γ + θE| / (θE)`.
pub fn dirichlet_relative_residual(gamma_re: f64, theta: f64, energy: f64) -> f64 {
    (gamma_re + theta * energy).abs() / (theta * energy)
}
