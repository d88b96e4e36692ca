//! Sequential importance resampling with the bootstrap proposal.
//!
//! With `pi(x_k | x_{k-1}, Z^k) = p(x_k | x_{k-1})` the importance weight update reduces
//! to `w <- w * p(z_k | x_k)`. Weights are kept in the linear domain; [`normalize`]
//! rescales by the maximum first so tiny weights do not underflow the sum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::imaging::ImageFrame;
use crate::rng;
use crate::state::{self, DynamicsParams, InitSpec, Particle, ParticleSet, StateVector};

/// Measurement model `p(z_k | x_k)`, up to a constant factor.
///
/// Implementations must return finite, nonnegative values for finite states.
pub trait Likelihood: Sync {
    fn evaluate(&self, state: &StateVector, frame: &ImageFrame) -> f64;
}

impl<F> Likelihood for F
where
    F: Fn(&StateVector, &ImageFrame) -> f64 + Sync,
{
    fn evaluate(&self, state: &StateVector, frame: &ImageFrame) -> f64 {
        self(state, frame)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleScheme {
    /// I.i.d. index draws with `Pr[s(i) = l] = w_l`.
    #[default]
    Multinomial,
    /// One uniform offset, `N` evenly spaced pointers.
    Systematic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    /// Resample when `ESS < threshold_fraction * N`.
    pub threshold_fraction: f64,
    pub scheme: ResampleScheme,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            threshold_fraction: 0.5,
            scheme: ResampleScheme::Multinomial,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threshold_fraction > 0.0 && self.threshold_fraction <= 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "threshold_fraction",
                format!("must lie in (0, 1], got {}", self.threshold_fraction),
            ))
        }
    }

    pub fn threshold(&self, n: usize) -> f64 {
        self.threshold_fraction * n as f64
    }
}

/// Scales weights to sum to one.
///
/// Fails with [`Error::DegenerateWeights`] when no weight is positive.
pub fn normalize(set: &mut ParticleSet) -> Result<()> {
    let max = set.weights().fold(0.0f64, f64::max);
    if max.is_nan() || max <= 0.0 || max.is_infinite() {
        return Err(Error::DegenerateWeights { frame: None });
    }
    let particles = set.particles_mut();
    for p in particles.iter_mut() {
        p.weight /= max;
    }
    let sum: f64 = particles.iter().map(|p| p.weight).sum();
    for p in particles.iter_mut() {
        p.weight /= sum;
    }
    Ok(())
}

/// `1 / sum(w_i^2)` of a normalized set; lies in `[1, N]`.
pub fn effective_sample_size(set: &ParticleSet) -> f64 {
    1.0 / set.weights().map(|w| w * w).sum::<f64>()
}

/// Draws `N` particles with replacement according to the weights and resets every
/// weight to `1/N`. Input weights need not be normalized.
pub fn resample<R: Rng + ?Sized>(set: &ParticleSet, scheme: ResampleScheme, rng: &mut R) -> ParticleSet {
    let n = set.len();
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in set.weights() {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    // rounding can push a pointer past the last cumulative value
    let last = set.weights().rposition(|w| w > 0.0).unwrap_or(n - 1);
    // first index whose cumulative weight exceeds u; never a zero-weight particle
    let pick = |u: f64| cdf.partition_point(|&c| c <= u).min(last);

    let weight = 1.0 / n as f64;
    let src = set.particles();
    let particles = match scheme {
        ResampleScheme::Multinomial => (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                Particle {
                    state: src[pick(u)].state,
                    weight,
                }
            })
            .collect(),
        ResampleScheme::Systematic => {
            let step = total / n as f64;
            let u0 = rng.random::<f64>() * step;
            let mut j = 0;
            (0..n)
                .map(|i| {
                    let u = u0 + i as f64 * step;
                    while j < last && cdf[j] <= u {
                        j += 1;
                    }
                    Particle {
                        state: src[j].state,
                        weight,
                    }
                })
                .collect()
        }
    };
    ParticleSet::at_timestep(particles, set.timestep()).expect("n >= 1")
}

/// Moves every particle through the dynamics. Particle `i` draws from sub-stream `i`
/// of `step_key`.
pub(crate) fn propagate_all(set: &mut ParticleSet, dynamics: &DynamicsParams, step_key: u64, exec: Execution) {
    exec.for_each_mut(set.particles_mut(), |i, p| {
        let mut r = rng::substream(step_key, i as u64);
        p.state = state::propagate(&p.state, dynamics, &mut r);
    });
}

fn check_not_degenerate(set: &ParticleSet) -> Result<()> {
    if set.weights().any(|w| w > 0.0) {
        Ok(())
    } else {
        Err(Error::DegenerateWeights { frame: None })
    }
}

/// Multiplies every weight by the likelihood at the particle's own state.
/// Returns the number of likelihood evaluations (`N`).
pub fn weight_exact<L: Likelihood + ?Sized>(
    set: &mut ParticleSet,
    frame: &ImageFrame,
    lik: &L,
    exec: Execution,
) -> Result<u64> {
    exec.for_each_mut(set.particles_mut(), |_, p| {
        p.weight *= lik.evaluate(&p.state, frame);
    });
    check_not_degenerate(set)?;
    Ok(set.len() as u64)
}

/// One SIS step: propagate, then weight by the likelihood. Weights are left
/// unnormalized. Returns the number of likelihood evaluations.
pub fn sis_step<L: Likelihood + ?Sized, R: Rng + ?Sized>(
    set: &mut ParticleSet,
    frame: &ImageFrame,
    lik: &L,
    dynamics: &DynamicsParams,
    exec: Execution,
    rng: &mut R,
) -> Result<u64> {
    let step_key = rng.random::<u64>();
    propagate_all(set, dynamics, step_key, exec);
    let evals = weight_exact(set, frame, lik, exec)?;
    set.advance();
    Ok(evals)
}

/// Everything a tracking run needs besides the frames and the likelihood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub init: InitSpec,
    pub dynamics: DynamicsParams,
    pub resample: ResampleConfig,
    pub execution: Execution,
}

impl FilterConfig {
    pub fn new(n_particles: usize, init: InitSpec) -> Self {
        Self {
            n_particles,
            init,
            dynamics: DynamicsParams::default(),
            resample: ResampleConfig::default(),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::EmptyParticleSet);
        }
        self.dynamics.validate()?;
        self.resample.validate()
    }
}

/// Per-frame output of a tracking run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    /// Weighted posterior mean before resampling, one per frame.
    pub estimates: Vec<StateVector>,
    /// ESS after normalization, one per frame.
    pub ess: Vec<f64>,
    pub resampled: Vec<bool>,
    pub likelihood_evaluations: u64,
}

impl Trajectory {
    pub fn resample_count(&self) -> usize {
        self.resampled.iter().filter(|&&r| r).count()
    }

    /// Root-mean-square position error against `truth`, frame by frame.
    pub fn rmse(&self, truth: &[StateVector]) -> f64 {
        assert_eq!(self.estimates.len(), truth.len(), "trajectory and truth lengths differ");
        let se: f64 = self
            .estimates
            .iter()
            .zip(truth)
            .map(|(e, t)| e.position_error(t).powi(2))
            .sum();
        (se / truth.len() as f64).sqrt()
    }
}

/// The shared SIR loop; `step` performs the (exact or piecewise-constant) SIS step
/// and returns its likelihood-evaluation count.
pub(crate) fn track_with<R, S>(frames: &[ImageFrame], cfg: &FilterConfig, rng: &mut R, mut step: S) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    S: FnMut(&mut ParticleSet, &ImageFrame, &mut R) -> Result<u64>,
{
    if frames.is_empty() {
        return Err(Error::invalid("frames", "need at least one frame"));
    }
    cfg.validate()?;
    let n = cfg.n_particles;
    let mut set = state::init_particle_set(n, &cfg.init, rng)?;
    let mut out = Trajectory {
        estimates: Vec::with_capacity(frames.len()),
        ess: Vec::with_capacity(frames.len()),
        resampled: Vec::with_capacity(frames.len()),
        likelihood_evaluations: 0,
    };
    for (k, frame) in frames.iter().enumerate() {
        out.likelihood_evaluations += step(&mut set, frame, rng).map_err(|e| e.at_frame(k))?;
        normalize(&mut set).map_err(|e| e.at_frame(k))?;
        out.estimates.push(set.weighted_mean());
        let ess = effective_sample_size(&set);
        out.ess.push(ess);
        let resample_now = ess < cfg.resample.threshold(n);
        if resample_now {
            set = resample(&set, cfg.resample.scheme, rng);
        }
        out.resampled.push(resample_now);
    }
    Ok(out)
}

/// Classical SIR over `frames`.
pub fn sir_track<L: Likelihood + ?Sized, R: Rng + ?Sized>(
    frames: &[ImageFrame],
    lik: &L,
    cfg: &FilterConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    track_with(frames, cfg, rng, |set, frame, rng| {
        sis_step(set, frame, lik, &cfg.dynamics, cfg.execution, rng)
    })
}
