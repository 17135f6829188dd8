//! Binary dump of distance, kernel and normalized matrices.
//!
//! Layout (little endian): 8-byte magic, `u8` content, `u8` storage, `u64`
//! N_emb, `u64` Q, `f64` ε (`NaN` for distances), `u64` k_nn (0 for none),
//! then the matrix as row-major `f64` (dense) or `u64` nnz, `u64` row pointers,
//! `u64` columns and `f64` values (CSR). Normalized matrices append ρ and σ.
//! Spectra store `m` in the k_nn slot and the solver in the storage byte,
//! followed by λ, η, residuals (length `m + 1`), the weights and the row-major
//! eigenfunction matrix.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::delay_kernel::{DelayDistanceMatrix, KernelBundle, KernelMatrix};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::markov::MarkovBundle;
use crate::scalar::Real;
use crate::spectrum::{MarkovSpectrum, Solver};

pub const MAGIC: &[u8; 8] = b"KOOPDK01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Content {
    Distance = 0,
    Kernel = 1,
    Markov = 2,
    Spectrum = 3,
}

struct Header {
    content: u8,
    storage: u8,
    n: usize,
    q: usize,
    epsilon: f64,
    k_nn: usize,
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn put_values<T: Real>(w: &mut impl Write, vals: impl Iterator<Item = T>) -> Result<()> {
    for v in vals {
        put_f64(w, v.as_f64())?;
    }
    Ok(())
}

fn get_values<T: Real>(r: &mut impl Read, n: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = vec![0u8; 8 * 4096];
    let mut left = n;
    while left > 0 {
        let take = left.min(4096);
        r.read_exact(&mut buf[..8 * take])?;
        for c in buf[..8 * take].chunks_exact(8) {
            out.push(T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))));
        }
        left -= take;
    }
    Ok(out)
}

fn write_header(w: &mut impl Write, h: &Header) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[h.content, h.storage])?;
    put_u64(w, h.n as u64)?;
    put_u64(w, h.q as u64)?;
    put_f64(w, h.epsilon)?;
    put_u64(w, h.k_nn as u64)
}

fn read_header(r: &mut impl Read, expect: Content) -> Result<Header> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    if b[0] != expect as u8 {
        return Err(Error::Format(format!("content tag {} where {} expected", b[0], expect as u8)));
    }
    Ok(Header {
        content: b[0],
        storage: b[1],
        n: get_u64(r)? as usize,
        q: get_u64(r)? as usize,
        epsilon: get_f64(r)?,
        k_nn: get_u64(r)? as usize,
    })
}

fn write_matrix<T: Real>(w: &mut impl Write, m: &KernelMatrix<T>) -> Result<()> {
    match m {
        KernelMatrix::Dense(a) => put_values(w, a.iter().copied()),
        KernelMatrix::Sparse(s) => {
            put_u64(w, s.nnz() as u64)?;
            let mut p = 0u64;
            put_u64(w, 0)?;
            for (idx, _) in s.rows() {
                p += idx.len() as u64;
                put_u64(w, p)?;
            }
            for (idx, _) in s.rows() {
                for &j in idx {
                    put_u64(w, j as u64)?;
                }
            }
            for (_, val) in s.rows() {
                put_values(w, val.iter().copied())?;
            }
            Ok(())
        }
    }
}

fn read_matrix<T: Real>(r: &mut impl Read, h: &Header) -> Result<KernelMatrix<T>> {
    let n = h.n;
    if h.storage == 0 {
        let v = get_values(r, n * n)?;
        return Ok(KernelMatrix::Dense(
            Array2::from_shape_vec((n, n), v).map_err(|e| Error::Format(e.to_string()))?,
        ));
    }
    let nnz = get_u64(r)? as usize;
    let indptr: Vec<usize> = (0..=n).map(|_| get_u64(r).map(|v| v as usize)).collect::<Result<_>>()?;
    if indptr.last() != Some(&nnz) {
        return Err(Error::Format("row pointers inconsistent with nnz".into()));
    }
    let cols: Vec<usize> = (0..nnz).map(|_| get_u64(r).map(|v| v as usize)).collect::<Result<_>>()?;
    let vals: Vec<T> = get_values(r, nnz)?;
    let rows = (0..n)
        .map(|i| (indptr[i]..indptr[i + 1]).map(|p| (cols[p], vals[p])).collect())
        .collect();
    Ok(KernelMatrix::Sparse(CsrMatrix::from_rows(n, rows)?))
}

pub fn save_distance<T: Real>(path: impl AsRef<Path>, d: &DelayDistanceMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        &Header {
            content: Content::Distance as u8,
            storage: 0,
            n: d.n_emb(),
            q: d.q(),
            epsilon: f64::NAN,
            k_nn: 0,
        },
    )?;
    put_values(&mut w, d.entries().iter().copied())?;
    w.flush()?;
    Ok(())
}

pub fn load_distance<T: Real>(path: impl AsRef<Path>) -> Result<DelayDistanceMatrix<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r, Content::Distance)?;
    let KernelMatrix::Dense(a) = read_matrix(&mut r, &h)? else {
        return Err(Error::Format("distance matrices are dense".into()));
    };
    DelayDistanceMatrix::from_entries(h.q, a)
}

pub fn save_kernel<T: Real>(path: impl AsRef<Path>, k: &KernelBundle<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        &Header {
            content: Content::Kernel as u8,
            storage: u8::from(!k.kernel.is_dense()),
            n: k.n_emb(),
            q: k.q,
            epsilon: k.epsilon.as_f64(),
            k_nn: k.k_nn.unwrap_or(0),
        },
    )?;
    write_matrix(&mut w, &k.kernel)?;
    w.flush()?;
    Ok(())
}

pub fn load_kernel<T: Real>(path: impl AsRef<Path>) -> Result<KernelBundle<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r, Content::Kernel)?;
    Ok(KernelBundle {
        kernel: read_matrix(&mut r, &h)?,
        epsilon: T::lit(h.epsilon),
        q: h.q,
        k_nn: (h.k_nn > 0).then_some(h.k_nn),
    })
}

pub fn save_markov<T: Real>(path: impl AsRef<Path>, m: &MarkovBundle<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        &Header {
            content: Content::Markov as u8,
            storage: u8::from(!m.p_hat().is_dense()),
            n: m.n_emb(),
            q: m.q,
            epsilon: m.epsilon.as_f64(),
            k_nn: m.k_nn.unwrap_or(0),
        },
    )?;
    write_matrix(&mut w, m.p_hat())?;
    put_values(&mut w, m.rho.iter().copied())?;
    put_values(&mut w, m.sigma.iter().copied())?;
    w.flush()?;
    Ok(())
}

pub fn load_markov<T: Real>(path: impl AsRef<Path>) -> Result<MarkovBundle<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r, Content::Markov)?;
    debug_assert_eq!(h.content, Content::Markov as u8);
    let p_hat = read_matrix(&mut r, &h)?;
    let rho = Array1::from(get_values::<T>(&mut r, h.n)?);
    let sigma = Array1::from(get_values::<T>(&mut r, h.n)?);
    MarkovBundle::from_parts(
        rho,
        sigma,
        p_hat,
        T::lit(h.epsilon),
        h.q,
        (h.k_nn > 0).then_some(h.k_nn),
    )
}

fn solver_tag(s: Solver) -> u8 {
    match s {
        Solver::Auto => 0,
        Solver::Dense => 1,
        Solver::Lanczos => 2,
    }
}

/// `q` and `epsilon` label the kernel the spectrum came from.
pub fn save_spectrum<T: Real>(
    path: impl AsRef<Path>,
    s: &MarkovSpectrum<T>,
    q: usize,
    epsilon: T,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[Content::Spectrum as u8, solver_tag(s.solver)])?;
    put_u64(&mut w, s.n_emb() as u64)?;
    put_u64(&mut w, q as u64)?;
    put_f64(&mut w, epsilon.as_f64())?;
    put_u64(&mut w, s.m() as u64)?;
    put_values(&mut w, s.lambdas.iter().copied())?;
    put_values(&mut w, s.etas.iter().copied())?;
    put_values(&mut w, s.residuals.iter().copied())?;
    put_values(&mut w, s.weights.iter().copied())?;
    put_values(&mut w, s.phis.iter().copied())?;
    w.flush()?;
    Ok(())
}

/// Returns the spectrum with the `(q, ε)` label it was saved under.
pub fn load_spectrum<T: Real>(path: impl AsRef<Path>) -> Result<(MarkovSpectrum<T>, usize, T)> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r, Content::Spectrum)?;
    let solver = match h.storage {
        0 => Solver::Auto,
        1 => Solver::Dense,
        2 => Solver::Lanczos,
        t => return Err(Error::Format(format!("unknown solver tag {t}"))),
    };
    let k = h.k_nn + 1;
    let lambdas = Array1::from(get_values::<T>(&mut r, k)?);
    let etas = Array1::from(get_values::<T>(&mut r, k)?);
    let residuals = get_values::<T>(&mut r, k)?;
    let weights = Array1::from(get_values::<T>(&mut r, h.n)?);
    let phis = Array2::from_shape_vec((h.n, k), get_values::<T>(&mut r, h.n * k)?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let spectrum = MarkovSpectrum {
        lambdas,
        phis,
        etas,
        weights,
        residuals,
        solver,
    };
    Ok((spectrum, h.q, T::lit(h.epsilon)))
}
