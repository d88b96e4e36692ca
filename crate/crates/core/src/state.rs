//! State space, particle containers and the nearly-constant-velocity dynamics.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Object state: position and velocity in pixels (per frame) plus peak intensity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub intensity: f64,
}

impl StateVector {
    pub const fn new(x: f64, y: f64, vx: f64, vy: f64, intensity: f64) -> Self {
        Self {
            x,
            y,
            vx,
            vy,
            intensity,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.x, self.y, self.vx, self.vy, self.intensity]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// Euclidean distance between the spatial components.
    pub fn position_error(&self, other: &StateVector) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub state: StateVector,
    pub weight: f64,
}

/// `N` weighted samples of the posterior at timestep `k`.
///
/// `N` is fixed at construction; every filter operation preserves it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    timestep: usize,
}

impl ParticleSet {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        Self::at_timestep(particles, 0)
    }

    pub fn at_timestep(particles: Vec<Particle>, timestep: usize) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::EmptyParticleSet);
        }
        Ok(Self {
            particles,
            timestep,
        })
    }

    /// Particles with the given weights, in order. Mostly useful in tests.
    pub fn from_weights(state: StateVector, weights: &[f64]) -> Result<Self> {
        Self::new(
            weights
                .iter()
                .map(|&weight| Particle { state, weight })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub(crate) fn advance(&mut self) {
        self.timestep += 1;
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particles_mut(&mut self) -> &mut [Particle] {
        &mut self.particles
    }

    pub fn weights(&self) -> impl DoubleEndedIterator<Item = f64> + ExactSizeIterator + '_ {
        self.particles.iter().map(|p| p.weight)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights().sum()
    }

    /// Weighted mean of all state components. Weights need not be normalized.
    pub fn weighted_mean(&self) -> StateVector {
        let mut acc = [0.0; 5];
        let mut total = 0.0;
        for p in &self.particles {
            for (a, c) in acc.iter_mut().zip(p.state.to_array()) {
                *a += p.weight * c;
            }
            total += p.weight;
        }
        StateVector::from_array(acc.map(|a| a / total))
    }
}

/// Process-noise magnitudes of the nearly-constant-velocity model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Position noise std (pixels).
    pub sigma_pos: f64,
    /// Velocity noise std (pixels/frame).
    pub sigma_vel: f64,
    /// Intensity noise std (intensity units). Zero holds `I0` constant.
    pub sigma_int: f64,
    /// Frame interval.
    pub dt: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            sigma_pos: 0.5,
            sigma_vel: 0.5,
            sigma_int: 0.0,
            dt: 1.0,
        }
    }
}

impl DynamicsParams {
    pub fn noise_free() -> Self {
        Self {
            sigma_pos: 0.0,
            sigma_vel: 0.0,
            sigma_int: 0.0,
            dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_pos", self.sigma_pos),
            ("sigma_vel", self.sigma_vel),
            ("sigma_int", self.sigma_int),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Draws `x_k ~ p(x_k | x_{k-1})`.
///
/// Always consumes five standard normals, whatever the sigmas, so that a stream's
/// position does not depend on the noise configuration.
pub fn propagate<R: Rng + ?Sized>(
    state: &StateVector,
    params: &DynamicsParams,
    rng: &mut R,
) -> StateVector {
    let mut z = [0.0f64; 5];
    for zi in &mut z {
        *zi = StandardNormal.sample(rng);
    }
    let dt = params.dt;
    StateVector {
        x: state.x + state.vx * dt + params.sigma_pos * z[0],
        y: state.y + state.vy * dt + params.sigma_pos * z[1],
        vx: state.vx + params.sigma_vel * z[2],
        vy: state.vy + params.sigma_vel * z[3],
        intensity: (state.intensity + params.sigma_int * z[4]).max(0.0),
    }
}

/// Initial distribution `pi(x_0)`.
///
/// Box and Gaussian variants spread the spatial components only; velocity and
/// intensity are copied from `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitSpec {
    Point(StateVector),
    UniformBox {
        center: StateVector,
        half_width: f64,
        half_height: f64,
    },
    Gaussian {
        center: StateVector,
        sigma: f64,
    },
}

impl InitSpec {
    pub fn center(&self) -> StateVector {
        match *self {
            InitSpec::Point(s) => s,
            InitSpec::UniformBox { center, .. } | InitSpec::Gaussian { center, .. } => center,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector {
        match *self {
            InitSpec::Point(s) => s,
            InitSpec::UniformBox {
                center,
                half_width,
                half_height,
            } => StateVector {
                x: center.x + half_width * (2.0 * rng.random::<f64>() - 1.0),
                y: center.y + half_height * (2.0 * rng.random::<f64>() - 1.0),
                ..center
            },
            InitSpec::Gaussian { center, sigma } => {
                // validated on construction of the particle set
                let n = Normal::new(0.0, sigma).expect("sigma checked");
                StateVector {
                    x: center.x + n.sample(rng),
                    y: center.y + n.sample(rng),
                    ..center
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InitSpec::Point(_) => Ok(()),
            InitSpec::UniformBox {
                half_width,
                half_height,
                ..
            } => {
                if half_width >= 0.0 && half_height >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("init box", "half extents must be >= 0"))
                }
            }
            InitSpec::Gaussian { sigma, .. } => {
                if sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("init sigma", format!("must be >= 0, got {sigma}")))
                }
            }
        }
    }
}

/// `n` particles drawn from `init`, each with weight `1/n`.
pub fn init_particle_set<R: Rng + ?Sized>(
    n: usize,
    init: &InitSpec,
    rng: &mut R,
) -> Result<ParticleSet> {
    if n == 0 {
        return Err(Error::EmptyParticleSet);
    }
    init.validate()?;
    let weight = 1.0 / n as f64;
    let particles = (0..n)
        .map(|_| Particle {
            state: init.sample(rng),
            weight,
        })
        .collect();
    ParticleSet::new(particles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn noise_free_drift() {
        let mut r = rng::master(1);
        let p = DynamicsParams::noise_free();
        let s = propagate(&StateVector::new(10.0, 10.0, 2.0, 0.0, 100.0), &p, &mut r);
        assert_eq!(s, StateVector::new(12.0, 10.0, 2.0, 0.0, 100.0));
        let s = propagate(&StateVector::new(0.0, 0.0, 0.0, 0.0, 50.0), &p, &mut r);
        assert_eq!(s, StateVector::new(0.0, 0.0, 0.0, 0.0, 50.0));
    }

    #[test]
    fn noise_free_twice_is_exact_affine() {
        let mut r = rng::master(2);
        let p = DynamicsParams::noise_free();
        let s0 = StateVector::new(3.25, -1.5, 0.75, 1.25, 7.0);
        let s2 = propagate(&propagate(&s0, &p, &mut r), &p, &mut r);
        assert_eq!(s2.x, s0.x + 2.0 * s0.vx);
        assert_eq!(s2.y, s0.y + 2.0 * s0.vy);
    }

    #[test]
    fn position_noise_matches_gaussian_law() {
        let mut r = rng::master(3);
        let p = DynamicsParams {
            sigma_pos: 1.0,
            sigma_vel: 0.0,
            sigma_int: 0.0,
            dt: 1.0,
        };
        let s0 = StateVector::new(0.0, 0.0, 0.0, 0.0, 1.0);
        let n = 1_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let x = propagate(&s0, &p, &mut r).x;
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let std = (sum2 / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 3.0 / 1000.0, "mean {mean}");
        assert!((std - 1.0).abs() < 0.01, "std {std}");
    }

    #[test]
    fn intensity_is_clamped_at_zero() {
        let mut r = rng::master(4);
        let p = DynamicsParams {
            sigma_int: 100.0,
            ..DynamicsParams::noise_free()
        };
        for _ in 0..1000 {
            let s = propagate(&StateVector::new(0.0, 0.0, 0.0, 0.0, 0.5), &p, &mut r);
            assert!(s.intensity >= 0.0);
        }
    }

    #[test]
    fn point_init_gives_uniform_weights() {
        let s = StateVector::new(1.0, 2.0, 3.0, 4.0, 5.0);
        let set = init_particle_set(4, &InitSpec::Point(s), &mut rng::master(5)).unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.particles().iter().all(|p| p.weight == 0.25 && p.state == s));

        let set = init_particle_set(100, &InitSpec::Point(s), &mut rng::master(5)).unwrap();
        assert!((set.total_weight() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_particles_rejected() {
        let r = init_particle_set(0, &InitSpec::Point(StateVector::default()), &mut rng::master(6));
        assert!(matches!(r, Err(Error::EmptyParticleSet)));
    }

    #[test]
    fn uniform_box_mean_is_box_center() {
        let center = StateVector::new(20.0, 30.0, 0.0, 0.0, 1.0);
        let init = InitSpec::UniformBox {
            center,
            half_width: 1.5,
            half_height: 1.5,
        };
        let set = init_particle_set(100_000, &init, &mut rng::master(7)).unwrap();
        let mean_x = set.particles().iter().map(|p| p.state.x).sum::<f64>() / 1e5;
        assert!((mean_x - 20.0).abs() < 0.01, "{mean_x}");
        assert!(set
            .particles()
            .iter()
            .all(|p| (p.state.x - 20.0).abs() <= 1.5 && (p.state.y - 30.0).abs() <= 1.5));
    }

    #[test]
    fn invalid_dynamics_rejected() {
        let p = DynamicsParams {
            sigma_vel: -1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(DynamicsParams::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn propagation_stays_finite(
            x in -1e6f64..1e6, y in -1e6f64..1e6,
            vx in -100f64..100.0, vy in -100f64..100.0,
            i0 in 0f64..1e4, seed in any::<u64>(),
            sp in 0f64..10.0, sv in 0f64..10.0, si in 0f64..10.0,
        ) {
            let p = DynamicsParams { sigma_pos: sp, sigma_vel: sv, sigma_int: si, dt: 1.0 };
            let s = propagate(&StateVector::new(x, y, vx, vy, i0), &p, &mut rng::substream(seed, 0));
            prop_assert!(s.is_finite());
            prop_assert!(s.intensity >= 0.0);
        }
    }
}
