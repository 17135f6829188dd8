//! Koopman eigenvalues and eigenfunctions from delay-coordinate Markov kernels.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// `!(x > 0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod delay_kernel;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod galerkin;
pub mod linalg;
pub mod markov;
pub mod pipeline;
mod scalar;
pub mod spectrum;
#[cfg(test)]
mod test_util;

pub use error::{Error, Result};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::Real;

pub type Trajectory = dynamics::ObservedTrajectory<f64>;
pub type System = dynamics::SystemSpec<f64>;
pub type DistanceMatrix = delay_kernel::DelayDistanceMatrix<f64>;
pub type Kernel = delay_kernel::KernelBundle<f64>;
pub type Markov = markov::MarkovBundle<f64>;
pub type Spectrum = spectrum::MarkovSpectrum<f64>;
pub type Generator = galerkin::GeneratorSolution<f64>;
pub type Scheme = galerkin::FdScheme<f64>;
