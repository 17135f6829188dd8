use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which test system generates (or produced) a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// Fayad's reparameterized mixing flow on T³ times a circle rotation.
    FayadTorusProduct,
    /// Lorenz 63 times a circle rotation.
    L63Product,
    /// Lorenz 63 alone.
    L63Pure,
    /// A lone circle rotation.
    CircleRotation,
    /// Data supplied from a file; no generator.
    External,
}

impl SystemKind {
    pub fn has_rotation(self) -> bool {
        matches!(
            self,
            SystemKind::FayadTorusProduct | SystemKind::L63Product | SystemKind::CircleRotation
        )
    }

    pub fn is_l63(self) -> bool {
        matches!(self, SystemKind::L63Product | SystemKind::L63Pure)
    }

    pub fn default_observation(self) -> ObservationMap {
        match self {
            SystemKind::FayadTorusProduct => ObservationMap::TorusAdditive,
            SystemKind::L63Product => ObservationMap::L63Nonlinear,
            SystemKind::L63Pure | SystemKind::External => ObservationMap::Identity,
            SystemKind::CircleRotation => ObservationMap::Circle,
        }
    }
}

/// Observation map applied to a product state `(x, y, z, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMap {
    /// `(sin α + sin x, cos α + sin y, sin 2α + sin z)`
    TorusAdditive,
    /// `(sin(α + x), cos(2α + y), cos(α + z))`
    L63Nonlinear,
    /// `(x, y, z)`
    Identity,
    /// `(sin α, cos α)`
    Circle,
}

impl ObservationMap {
    pub fn dim(self) -> usize {
        match self {
            ObservationMap::Circle => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L63Params<T> {
    pub sigma: T,
    pub rho: T,
    pub beta: T,
}

impl<T: Real> Default for L63Params<T> {
    fn default() -> Self {
        L63Params {
            sigma: T::lit(10.0),
            rho: T::lit(28.0),
            beta: T::lit(8.0) / T::lit(3.0),
        }
    }
}

/// Full description of a generating system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec<T> {
    pub kind: SystemKind,
    /// Frequency vector of the torus flow.
    pub nu: [T; 3],
    /// Rotation frequency (rad per time unit).
    pub omega: T,
    pub l63: L63Params<T>,
    /// Truncation of the reparameterization series; 0 gives the linear flow.
    pub k_max: usize,
    pub observation: ObservationMap,
}

pub const DEFAULT_K_MAX: usize = 32;

impl<T: Real> SystemSpec<T> {
    pub fn new(kind: SystemKind) -> Self {
        SystemSpec {
            kind,
            nu: [T::lit(2.0).sqrt(), T::lit(10.0).sqrt(), T::one()],
            omega: T::one(),
            l63: L63Params::default(),
            k_max: DEFAULT_K_MAX,
            observation: kind.default_observation(),
        }
    }

    pub fn fayad_torus_product() -> Self {
        Self::new(SystemKind::FayadTorusProduct)
    }

    pub fn l63_product() -> Self {
        Self::new(SystemKind::L63Product)
    }

    pub fn l63_pure() -> Self {
        Self::new(SystemKind::L63Pure)
    }

    pub fn circle_rotation() -> Self {
        Self::new(SystemKind::CircleRotation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.has_rotation() && !(self.omega > T::zero() && self.omega.is_finite()) {
            return Err(Error::param("omega", "must be positive for rotation products"));
        }
        if self.kind.is_l63() {
            let p = &self.l63;
            if !(p.sigma > T::zero() && p.rho > T::zero() && p.beta > T::zero()) {
                return Err(Error::param("l63", "sigma, rho and beta must be positive"));
            }
        }
        if self.kind == SystemKind::FayadTorusProduct && self.nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("nu", "must be finite"));
        }
        Ok(())
    }

    /// Velocity of the continuous (non-rotation) subsystem.
    pub fn subsystem_velocity(&self, p: [T; 3]) -> Result<[T; 3]> {
        match self.kind {
            SystemKind::FayadTorusProduct => fayad_velocity(p, self.nu, self.k_max),
            SystemKind::L63Product | SystemKind::L63Pure => Ok(l63_velocity(
                p,
                self.l63.sigma,
                self.l63.rho,
                self.l63.beta,
            )),
            SystemKind::CircleRotation | SystemKind::External => Ok([T::zero(); 3]),
        }
    }
}

/// Point of a product state space: continuous coordinates plus a rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State<T> {
    pub xyz: [T; 3],
    pub alpha: T,
}

impl<T: Real> State<T> {
    pub fn new(xyz: [T; 3], alpha: T) -> Self {
        State { xyz, alpha }
    }

    pub fn is_finite(&self) -> bool {
        self.xyz.iter().all(|v| v.is_finite()) && self.alpha.is_finite()
    }
}

pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::TAU();
    let r = a % two_pi;
    let r = if r < T::zero() { r + two_pi } else { r };
    // `r + 2π` can round up to exactly 2π
    if r >= two_pi {
        T::zero()
    } else {
        r
    }
}

/// Sum over |l| ≤ k of e^{ilz}, i.e. the Dirichlet kernel sin((k+½)z)/sin(z/2).
fn dirichlet_kernel<T: Real>(k: usize, z: T) -> T {
    let half = T::lit(0.5);
    let s = (half * z).sin();
    let kf = T::from_usize_lossy(k);
    if s.abs() < T::lit(1e-12) {
        return T::lit(2.0) * kf + T::one();
    }
    ((kf + half) * z).sin() / s
}

/// Reparameterization density of the Fayad flow,
/// `1 + Σ_{k=1..K} (e^{-k}/k) cos(k(x+y)) D_k(z)`.
pub fn fayad_density<T: Real>(p: [T; 3], k_max: usize) -> T {
    let u = p[0] + p[1];
    let z = p[2];
    let mut phi = T::one();
    for k in 1..=k_max {
        let kf = T::from_usize_lossy(k);
        phi = phi + (-kf).exp() / kf * (kf * u).cos() * dirichlet_kernel(k, z);
    }
    phi
}

/// Fayad vector field `ν / φ(x, y, z)`.
pub fn fayad_velocity<T: Real>(p: [T; 3], nu: [T; 3], k_max: usize) -> Result<[T; 3]> {
    let phi = fayad_density(p, k_max);
    if !(phi > T::zero()) {
        return Err(Error::NonPositiveDensity {
            value: phi.as_f64(),
            point: [p[0].as_f64(), p[1].as_f64(), p[2].as_f64()],
        });
    }
    Ok([nu[0] / phi, nu[1] / phi, nu[2] / phi])
}

pub fn l63_velocity<T: Real>(p: [T; 3], sigma: T, rho: T, beta: T) -> [T; 3] {
    let [x, y, z] = p;
    [sigma * (y - x), x * (rho - z) - y, x * y - beta * z]
}

/// Exact rotation phase `(α₀ + ωt) mod 2π`.
pub fn rotation_state<T: Real>(alpha0: T, omega: T, t: T) -> T {
    wrap_angle(alpha0 + omega * t)
}

/// Applies the system's observation map to a state.
pub fn observe<T: Real>(spec: &SystemSpec<T>, s: &State<T>) -> Vec<T> {
    let [x, y, z] = s.xyz;
    let a = s.alpha;
    let two = T::lit(2.0);
    match spec.observation {
        ObservationMap::TorusAdditive => vec![
            a.sin() + x.sin(),
            a.cos() + y.sin(),
            (two * a).sin() + z.sin(),
        ],
        ObservationMap::L63Nonlinear => vec![(a + x).sin(), (two * a + y).cos(), (a + z).cos()],
        ObservationMap::Identity => vec![x, y, z],
        ObservationMap::Circle => vec![a.sin(), a.cos()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    // direct complex sum, independent of the Dirichlet-kernel form
    fn density_brute(p: [f64; 3], k_max: usize) -> f64 {
        let mut phi = 1.0;
        for k in 1..=k_max {
            let kf = k as f64;
            let mut s = Complex64::new(0.0, 0.0);
            for l in -(k as i64)..=(k as i64) {
                s += Complex64::from_polar(1.0, kf * (p[0] + p[1]) + l as f64 * p[2]);
            }
            phi += (-kf).exp() / kf * s.re;
        }
        phi
    }

    #[test]
    fn fayad_empty_series_is_linear_flow() {
        let nu = [2f64.sqrt(), 10f64.sqrt(), 1.0];
        let v = fayad_velocity([0.0, 0.0, 0.0], nu, 0).unwrap();
        assert_eq!(v, nu);
    }

    #[test]
    fn fayad_first_term_at_origin() {
        let v = fayad_velocity([0.0f64; 3], [1.0; 3], 1).unwrap();
        let phi = 1.0 + (-1.0f64).exp() * 3.0;
        for c in v {
            assert!((c - 1.0 / phi).abs() < 1e-15);
        }
    }

    #[test]
    fn fayad_closed_form_matches_complex_sum() {
        let pts = [
            [0.3, 1.1, 2.9],
            [PI, 0.0, 0.0],
            [1.0, 2.0, 2.0 * PI],
            [5.5, -0.7, 4.0 * PI],
            [0.1, 0.2, 1e-13],
        ];
        for p in pts {
            let a = fayad_density(p, 12);
            let b = density_brute(p, 12);
            assert!((a - b).abs() < 1e-12, "{p:?}: {a} vs {b}");
        }
    }

    #[test]
    fn fayad_truncation_tail_below_tolerance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = [
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.0..2.0 * PI),
            ];
            let d = (fayad_density(p, 32) - fayad_density(p, 64)).abs();
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn fayad_density_positive_on_grid() {
        // the minimum sits near x + y = π, z = 0, where φ ≈ 0.149
        let n = 60;
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let u = 2.0 * PI * i as f64 / n as f64;
                let z = 2.0 * PI * j as f64 / n as f64;
                min = min.min(fayad_density([u, 0.0, z], 32));
            }
        }
        assert!(min > 0.14 && min < 0.16, "{min}");
    }

    #[test]
    fn l63_velocity_examples() {
        let (s, r, b) = (10.0f64, 28.0f64, 8.0f64 / 3.0);
        assert_eq!(l63_velocity([0.0, 0.0, 0.0], s, r, b), [0.0, 0.0, 0.0]);
        let v = l63_velocity([1.0, 1.0, 1.0], s, r, b);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 26.0);
        assert!((v[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
        let c = (b * (r - 1.0)).sqrt();
        let v = l63_velocity([-c, -c, r - 1.0], s, r, b);
        for x in v {
            assert!(x.abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_state(0.0, 1.0, 2.0 * PI), 0.0);
        assert_eq!(rotation_state(1.0, 1.0, 0.0), 1.0);
        assert_eq!(rotation_state(0.0, 1.0, PI / 2.0), PI / 2.0);
        assert!(wrap_angle(-1e-18f64) < 2.0 * PI);
    }

    #[test]
    fn observation_examples() {
        let s = State::new([0.0, 0.0, 0.0], 0.0);
        assert_eq!(observe(&SystemSpec::<f64>::fayad_torus_product(), &s), vec![0.0, 1.0, 0.0]);
        assert_eq!(observe(&SystemSpec::<f64>::l63_product(), &s), vec![0.0, 1.0, 1.0]);
        let s = State::new([1.0, 2.0, 3.0], 0.4);
        assert_eq!(observe(&SystemSpec::<f64>::l63_pure(), &s), vec![1.0, 2.0, 3.0]);
        let a = observe(&SystemSpec::<f64>::fayad_torus_product(), &s);
        assert_eq!(a, observe(&SystemSpec::<f64>::fayad_torus_product(), &s));
    }

    #[test]
    fn defaults() {
        let s = SystemSpec::<f64>::fayad_torus_product();
        assert_eq!(s.nu, [2f64.sqrt(), 10f64.sqrt(), 1.0]);
        assert_eq!(s.omega, 1.0);
        assert_eq!(s.k_max, 32);
        let l = SystemSpec::<f64>::l63_pure().l63;
        assert_eq!((l.sigma, l.rho), (10.0, 28.0));
        assert!((l.beta - 8.0 / 3.0).abs() < 1e-16);
        let mut bad = SystemSpec::<f64>::l63_product();
        bad.omega = 0.0;
        assert!(bad.validate().is_err());
    }
}
