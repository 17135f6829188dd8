//! Delay-coordinate distances, Gaussian kernels, bandwidth selection and
//! nearest-neighbour sparsification.

mod distance;
mod kernel;
mod tune;

pub use distance::{cross_distance_matrix, delay_distance_matrix, DelayDistanceMatrix};
pub use kernel::{
    gaussian_kernel, gaussian_rows, into_gaussian_kernel, into_shaped_kernel, sparsify_knn,
    KernelBundle, KernelMatrix,
};
pub use tune::{
    default_grid, log_grid, tune_bandwidth, BandwidthRow, BandwidthTuning, DEFAULT_GRID_POINTS,
    MAX_TUNING_PAIRS,
};
