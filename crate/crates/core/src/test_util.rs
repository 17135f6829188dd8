use ndarray::Array2;
use rand::{Rng, SeedableRng};

use crate::dynamics::{ObservedTrajectory, Origin};

pub(crate) fn random_traj(n: usize, d: usize, seed: u64) -> ObservedTrajectory<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let s = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
    ObservedTrajectory::new(s, 0.01, Origin::External { path: "mem".into() }).unwrap()
}
