use std::path::PathBuf;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::systems::SystemKind;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Where a trajectory came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Origin {
    Generated { system: SystemKind, seed: Option<u64> },
    External { path: PathBuf },
}

/// Time-ordered observations `F(x_n)` sampled every `dt` along one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedTrajectory<T> {
    samples: Array2<T>,
    dt: T,
    origin: Origin,
}

impl<T: Real> ObservedTrajectory<T> {
    pub fn new(samples: Array2<T>, dt: T, origin: Origin) -> Result<Self> {
        let (n, d) = samples.dim();
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 samples, got {n}")));
        }
        if d < 1 {
            return Err(Error::Shape("observation dimension must be at least 1".into()));
        }
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if let Some(((i, j), _)) = samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite sample at row {i}, column {j}")));
        }
        Ok(ObservedTrajectory { samples, dt, origin })
    }

    pub fn samples(&self) -> &Array2<T> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<T> {
        self.samples
    }

    pub fn row(&self, n: usize) -> ArrayView1<'_, T> {
        self.samples.row(n)
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    /// Time stamp of row `n`.
    pub fn time(&self, n: usize) -> T {
        T::from_usize_lossy(n) * self.dt
    }

    /// Copy with each column's time mean removed.
    pub fn mean_subtracted(&self) -> Self {
        let mut s = self.samples.clone();
        let n = T::from_usize_lossy(s.nrows());
        for mut col in s.columns_mut() {
            let mean = col.iter().copied().sum::<T>() / n;
            col.mapv_inplace(|v| v - mean);
        }
        ObservedTrajectory {
            samples: s,
            dt: self.dt,
            origin: self.origin.clone(),
        }
    }

    /// Rows `range`, keeping `dt` and origin.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.len() < 2 {
            return Err(Error::Shape(format!(
                "slice {range:?} invalid for {} samples",
                self.len()
            )));
        }
        let s = self.samples.slice(ndarray::s![range, ..]).to_owned();
        Ok(ObservedTrajectory {
            samples: s,
            dt: self.dt,
            origin: self.origin.clone(),
        })
    }
}
