//! One-call chain from a trajectory to the ordered Galerkin solutions.

use std::time::{Duration, Instant};

use crate::delay_kernel::{
    default_grid, delay_distance_matrix, into_gaussian_kernel, sparsify_knn, tune_bandwidth,
    BandwidthTuning,
};
use crate::dynamics::ObservedTrajectory;
use crate::error::Result;
use crate::galerkin::{solve_generator, GalerkinOptions, GeneratorSolution};
use crate::markov::{into_markov, MarkovBundle};
use crate::scalar::Real;
use crate::spectrum::{eigendecompose_with, EigenOptions, MarkovSpectrum};

#[derive(Debug, Clone)]
pub struct AnalysisConfig<T> {
    pub q: usize,
    /// `None` tunes the bandwidth on the default grid.
    pub epsilon: Option<T>,
    pub k_nn: Option<usize>,
    pub eigen: EigenOptions<T>,
    pub galerkin: GalerkinOptions<T>,
    /// Keep the normalized operator (needed for out-of-sample extension).
    pub keep_markov: bool,
}

impl<T: Real> AnalysisConfig<T> {
    pub fn new(q: usize) -> Self {
        AnalysisConfig {
            q,
            epsilon: None,
            k_nn: None,
            eigen: EigenOptions::default(),
            galerkin: GalerkinOptions::default(),
            keep_markov: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub distances: Duration,
    pub bandwidth: Duration,
    pub normalization: Duration,
    pub eigensolve: Duration,
    pub galerkin: Duration,
}

#[derive(Debug, Clone)]
pub struct Analysis<T> {
    pub epsilon: T,
    pub tuning: Option<BandwidthTuning<T>>,
    /// Row-stochasticity residual of the normalized operator.
    pub markov_residual: T,
    pub spectrum: MarkovSpectrum<T>,
    pub generator: GeneratorSolution<T>,
    pub markov: Option<MarkovBundle<T>>,
    pub timings: StageTimings,
}

pub fn analyze<T: Real>(traj: &ObservedTrajectory<T>, cfg: &AnalysisConfig<T>) -> Result<Analysis<T>> {
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let d = delay_distance_matrix(traj, cfg.q)?;
    timings.distances = t.elapsed();

    let t = Instant::now();
    let (epsilon, tuning) = match cfg.epsilon {
        Some(e) => (e, None),
        None => {
            let tuning = tune_bandwidth(&d, &default_grid(&d))?;
            (tuning.epsilon, Some(tuning))
        }
    };
    timings.bandwidth = t.elapsed();

    let t = Instant::now();
    let mut kernel = into_gaussian_kernel(d, epsilon)?;
    if let Some(k) = cfg.k_nn {
        kernel = sparsify_knn(&kernel, k)?;
    }
    let markov = into_markov(kernel)?;
    let markov_residual = markov.row_stochastic_residual();
    timings.normalization = t.elapsed();

    let t = Instant::now();
    let spectrum = eigendecompose_with(&markov, cfg.galerkin.m, &cfg.eigen)?;
    timings.eigensolve = t.elapsed();
    let markov = cfg.keep_markov.then_some(markov);

    let t = Instant::now();
    let generator = solve_generator(&spectrum, traj.dt(), &cfg.galerkin)?;
    timings.galerkin = t.elapsed();

    Ok(Analysis {
        epsilon,
        tuning,
        markov_residual,
        spectrum,
        generator,
        markov,
        timings,
    })
}
