use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::systems::{observe, rotation_state, wrap_angle, State, SystemKind, SystemSpec};
use super::trajectory::{ObservedTrajectory, Origin};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Longest sample interval allowed per RK4 substep by the contract.
pub const MAX_SAMPLE_SUBSTEP: f64 = 0.01;

/// Desk-scale spinup for the Lorenz systems.
pub const DESK_L63_SPINUP: f64 = 100.0;
/// Lorenz spinup for full-scale runs.
pub const FULL_L63_SPINUP: f64 = 4000.0;

#[derive(Debug, Clone, Copy)]
pub struct IntegratorSettings<T> {
    /// Upper bound on the RK4 step.
    pub max_step: T,
}

impl<T: Real> Default for IntegratorSettings<T> {
    fn default() -> Self {
        IntegratorSettings {
            max_step: T::lit(1e-3),
        }
    }
}

impl<T: Real> IntegratorSettings<T> {
    pub fn substeps(&self, dt: T) -> usize {
        let a = (dt / T::lit(MAX_SAMPLE_SUBSTEP)).ceil();
        let b = (dt / self.max_step).ceil();
        a.max(b).max(T::one()).to_usize().unwrap_or(1)
    }
}

pub fn default_spinup(kind: SystemKind, full_scale: bool) -> f64 {
    match kind {
        SystemKind::L63Product | SystemKind::L63Pure if full_scale => FULL_L63_SPINUP,
        SystemKind::L63Product | SystemKind::L63Pure => DESK_L63_SPINUP,
        _ => 0.0,
    }
}

/// Seeded initial condition. Torus and rotation angles are uniform; the Lorenz
/// point is a perturbation of (1, 1, 20), inside the attractor's basin.
pub fn initial_state<T: Real>(kind: SystemKind, seed: u64) -> State<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let alpha = T::lit(rng.gen_range(0.0..tau));
    let xyz = match kind {
        SystemKind::L63Product | SystemKind::L63Pure => [
            T::lit(1.0 + rng.gen_range(-1.0..1.0)),
            T::lit(1.0 + rng.gen_range(-1.0..1.0)),
            T::lit(20.0 + rng.gen_range(-1.0..1.0)),
        ],
        _ => [
            T::lit(rng.gen_range(0.0..tau)),
            T::lit(rng.gen_range(0.0..tau)),
            T::lit(rng.gen_range(0.0..tau)),
        ],
    };
    State::new(xyz, alpha)
}

fn axpy<T: Real>(a: [T; 3], h: T, b: [T; 3]) -> [T; 3] {
    [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]]
}

fn rk4_step<T: Real>(spec: &SystemSpec<T>, p: [T; 3], h: T) -> Result<[T; 3]> {
    let half = T::lit(0.5);
    let k1 = spec.subsystem_velocity(p)?;
    let k2 = spec.subsystem_velocity(axpy(p, half * h, k1))?;
    let k3 = spec.subsystem_velocity(axpy(p, half * h, k2))?;
    let k4 = spec.subsystem_velocity(axpy(p, h, k3))?;
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    Ok([
        p[0] + sixth * (k1[0] + two * k2[0] + two * k3[0] + k4[0]),
        p[1] + sixth * (k1[1] + two * k2[1] + two * k3[1] + k4[1]),
        p[2] + sixth * (k1[2] + two * k2[2] + two * k3[2] + k4[2]),
    ])
}

struct Stepper<'a, T> {
    spec: &'a SystemSpec<T>,
    steps: usize,
}

impl<T: Real> Stepper<'_, T> {
    fn advance(&mut self, mut p: [T; 3], span: T, n_sub: usize) -> Result<[T; 3]> {
        if matches!(self.spec.kind, SystemKind::CircleRotation | SystemKind::External) {
            return Ok(p);
        }
        let h = span / T::from_usize_lossy(n_sub);
        for _ in 0..n_sub {
            p = rk4_step(self.spec, p, h)?;
            self.steps += 1;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { step: self.steps });
            }
        }
        if self.spec.kind == SystemKind::FayadTorusProduct {
            p = p.map(wrap_angle);
        }
        Ok(p)
    }
}

/// States at times `spinup + n·dt`, `n = 0..n_samples`.
pub fn integrate_states<T: Real>(
    spec: &SystemSpec<T>,
    x0: State<T>,
    dt: T,
    n_samples: usize,
    spinup: T,
    settings: &IntegratorSettings<T>,
) -> Result<Vec<State<T>>> {
    spec.validate()?;
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if n_samples < 2 {
        return Err(Error::param("n", "need at least 2 samples"));
    }
    if !(spinup >= T::zero() && spinup.is_finite()) {
        return Err(Error::param("spinup", "must be nonnegative"));
    }
    if !(settings.max_step > T::zero()) {
        return Err(Error::param("max_step", "must be positive"));
    }
    if !x0.is_finite() {
        return Err(Error::NonFiniteState { step: 0 });
    }

    let mut stepper = Stepper { spec, steps: 0 };
    let mut p = x0.xyz;
    if spec.kind == SystemKind::FayadTorusProduct {
        p = p.map(wrap_angle);
    }
    if spinup > T::zero() {
        let n_spin = settings.substeps(spinup).max(1);
        p = stepper.advance(p, spinup, n_spin)?;
    }
    let n_sub = settings.substeps(dt);
    let mut out = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        if n > 0 {
            p = stepper.advance(p, dt, n_sub)?;
        }
        let t = spinup + T::from_usize_lossy(n) * dt;
        let alpha = rotation_state(x0.alpha, spec.omega, t);
        out.push(State::new(p, alpha));
    }
    Ok(out)
}

pub fn integrate_trajectory<T: Real>(
    spec: &SystemSpec<T>,
    x0: State<T>,
    dt: T,
    n_samples: usize,
    spinup: T,
) -> Result<ObservedTrajectory<T>> {
    integrate_trajectory_with(spec, x0, dt, n_samples, spinup, &IntegratorSettings::default(), None)
}

pub fn integrate_trajectory_with<T: Real>(
    spec: &SystemSpec<T>,
    x0: State<T>,
    dt: T,
    n_samples: usize,
    spinup: T,
    settings: &IntegratorSettings<T>,
    seed: Option<u64>,
) -> Result<ObservedTrajectory<T>> {
    let states = integrate_states(spec, x0, dt, n_samples, spinup, settings)?;
    let d = spec.observation.dim();
    let mut samples = Array2::zeros((n_samples, d));
    for (mut row, s) in samples.rows_mut().into_iter().zip(&states) {
        for (dst, v) in row.iter_mut().zip(observe(spec, s)) {
            *dst = v;
        }
    }
    ObservedTrajectory::new(
        samples,
        dt,
        Origin::Generated {
            system: spec.kind,
            seed,
        },
    )
}

/// Seeded trajectory with the default initial condition for `spec.kind`.
pub fn generate<T: Real>(
    spec: &SystemSpec<T>,
    seed: u64,
    dt: T,
    n_samples: usize,
    spinup: T,
) -> Result<ObservedTrajectory<T>> {
    let x0 = initial_state(spec.kind, seed);
    integrate_trajectory_with(
        spec,
        x0,
        dt,
        n_samples,
        spinup,
        &IntegratorSettings::default(),
        Some(seed),
    )
}
