//! Sequential Monte Carlo object tracking with classical SIR and the
//! piecewise-constant pcSIR particle filter.
//!
//! The crate is organised bottom-up:
//!
//! - [`state`]: state vectors, particle containers and the nearly-constant-velocity dynamics.
//! - [`filter`]: the SIR filter (importance weighting, normalization, ESS, resampling).
//! - [`piecewise`]: spatial binning and the pcSIR weight broadcast.
//! - [`imaging`]: Gaussian PSF rendering and the windowed Gaussian-residual likelihood.
//! - [`synthesis`]: ground-truth trajectories and noisy synthetic image sequences.
//! - [`bounds`]: mid-point error bounds for piecewise-constant approximation and their quadrature oracle.
//! - [`experiment`] and [`report`]: the benchmark harness behind the `pcsir` command line.
//!
//! Per-particle work runs on rayon when the `parallel` feature is enabled (the default).
//! Every particle draws from its own indexed random sub-stream, so serial and parallel
//! execution give bit-identical results.

pub mod bounds;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod filter;
pub mod imaging;
pub mod piecewise;
pub mod report;
pub mod rng;
pub mod state;
pub mod synthesis;

pub use error::{Error, Result};
pub use exec::Execution;
pub use filter::{Likelihood, ResampleConfig, ResampleScheme, Trajectory};
pub use imaging::{ImageFrame, LikelihoodParams, PsfParams};
pub use piecewise::{BinGrid, DummyPlacement, PcConfig};
pub use state::{DynamicsParams, InitSpec, Particle, ParticleSet, StateVector};
