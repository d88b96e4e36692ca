//! Synthetic fluorescence-microscopy sequences: a single Gaussian spot moving under
//! nearly-constant-velocity dynamics, corrupted by Poisson noise at a target SNR.

pub mod io;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::imaging::{render_object, ImageFrame, PsfParams};
use crate::rng;
use crate::state::{propagate, DynamicsParams, StateVector};

/// Background level used when calibrating intensities from an SNR.
pub const DEFAULT_BACKGROUND: f64 = 10.0;

const MAX_TRAJECTORY_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// Noise-free rendering.
    None,
    /// Each pixel ~ Poisson(ideal intensity), plus optional zero-mean Gaussian read noise.
    Poisson { read_noise_std: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneConfig {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// PSF width and background; the object amplitude follows from `snr`.
    pub psf: PsfParams,
    pub snr: f64,
    /// Initial speed range in pixels/frame.
    pub speed_range: (f64, f64),
    /// Trajectories stay inside `[margin, size - 1 - margin]`.
    pub margin: usize,
    /// Dynamics of the ground truth itself.
    pub dynamics: DynamicsParams,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self::small_object(0)
    }
}

impl SceneConfig {
    fn base(psf_sigma: f64, snr: f64, speed: (f64, f64), margin: usize, seed: u64) -> Self {
        Self {
            frames: 50,
            width: 512,
            height: 512,
            psf: PsfParams {
                sigma_psf: psf_sigma,
                i_bg: DEFAULT_BACKGROUND,
            },
            snr,
            speed_range: speed,
            margin,
            dynamics: truth_dynamics(),
            noise: NoiseModel::Poisson { read_noise_std: 0.0 },
            seed,
        }
    }

    /// `sigma_PSF = 13`, SNR 2, speeds in `[2, 7]`, 65x65 likelihood support.
    pub fn large_object(seed: u64) -> Self {
        Self::base(13.0, 2.0, (2.0, 7.0), 32, seed)
    }

    /// `sigma_PSF = 1.16`, SNR 4, speeds in `[2, 4]`, 9x9 likelihood support.
    pub fn small_object(seed: u64) -> Self {
        Self::base(1.16, 4.0, (2.0, 4.0), 4, seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.psf.validate()?;
        self.dynamics.validate()?;
        if self.frames == 0 {
            return Err(Error::invalid("frames", "must be >= 1"));
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::invalid("snr", format!("must be > 0, got {}", self.snr)));
        }
        let (lo, hi) = self.speed_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid("speed_range", format!("need 0 <= min <= max, got ({lo}, {hi})")));
        }
        if self.width <= 2 * self.margin || self.height <= 2 * self.margin {
            return Err(Error::invalid(
                "frame size",
                format!("{}x{} leaves no interior inside margin {}", self.width, self.height, self.margin),
            ));
        }
        if let NoiseModel::Poisson { read_noise_std } = self.noise {
            if !(read_noise_std >= 0.0 && read_noise_std.is_finite()) {
                return Err(Error::invalid("read_noise_std", "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Object amplitude and background for this scene's SNR.
    pub fn intensities(&self) -> (f64, f64) {
        snr_calibrate(self.snr, &self.psf)
    }
}

/// Default ground-truth dynamics: small velocity and position jitter, constant intensity.
pub fn truth_dynamics() -> DynamicsParams {
    DynamicsParams {
        sigma_pos: 0.1,
        sigma_vel: 0.1,
        sigma_int: 0.0,
        dt: 1.0,
    }
}

/// Object amplitude `I0` such that `I0 / sqrt(I0 + I_bg) = snr` at fixed `I_bg = psf.i_bg`.
///
/// This is `(peak - background) / sqrt(peak)` for a Poisson-limited peak pixel.
pub fn snr_calibrate(snr: f64, psf: &PsfParams) -> (f64, f64) {
    let s2 = snr * snr;
    let bg = psf.i_bg;
    let i0 = 0.5 * (s2 + (s2 * s2 + 4.0 * s2 * bg).sqrt());
    (i0, bg)
}

/// Per-frame states of the single object.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub states: Vec<StateVector>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Random start inside the margin, uniform speed and heading, then the truth dynamics.
/// Trajectories that leave `[margin, size - 1 - margin]` are redrawn.
pub fn generate_truth<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> Result<GroundTruth> {
    cfg.validate()?;
    let (i0, _) = cfg.intensities();
    let m = cfg.margin as f64;
    let (xmax, ymax) = ((cfg.width - 1) as f64 - m, (cfg.height - 1) as f64 - m);
    let inside = |s: &StateVector| s.x >= m && s.x <= xmax && s.y >= m && s.y <= ymax;

    for _ in 0..MAX_TRAJECTORY_ATTEMPTS {
        let speed = uniform_in(rng, cfg.speed_range.0, cfg.speed_range.1);
        let heading = uniform_in(rng, 0.0, std::f64::consts::TAU);
        let mut s = StateVector::new(
            uniform_in(rng, m, xmax),
            uniform_in(rng, m, ymax),
            speed * heading.cos(),
            speed * heading.sin(),
            i0,
        );
        let mut states = Vec::with_capacity(cfg.frames);
        states.push(s);
        for _ in 1..cfg.frames {
            s = propagate(&s, &cfg.dynamics, rng);
            if !inside(&s) {
                break;
            }
            states.push(s);
        }
        if states.len() == cfg.frames {
            return Ok(GroundTruth { states });
        }
    }
    Err(Error::TrajectoryRejected {
        attempts: MAX_TRAJECTORY_ATTEMPTS,
    })
}

/// Renders one frame with the configured noise, drawing from `rng`.
pub fn render_noisy_frame<R: Rng + ?Sized>(
    object: &StateVector,
    cfg: &SceneConfig,
    rng: &mut R,
) -> ImageFrame {
    let mut frame = ImageFrame::filled(cfg.width, cfg.height, 0.0).expect("validated size");
    let read = match cfg.noise {
        NoiseModel::Poisson { read_noise_std } if read_noise_std > 0.0 => {
            Some(Normal::new(0.0, read_noise_std).expect("validated"))
        }
        _ => None,
    };
    let w = cfg.width;
    for (idx, px) in frame.pixels_mut().iter_mut().enumerate() {
        let at = ((idx % w) as f64, (idx / w) as f64);
        let ideal = render_object(object.position(), object.intensity, &cfg.psf, at);
        *px = match cfg.noise {
            NoiseModel::None => ideal,
            NoiseModel::Poisson { .. } => {
                let mut v = if ideal > 0.0 {
                    Poisson::new(ideal).expect("positive rate").sample(rng)
                } else {
                    0.0
                };
                if let Some(n) = &read {
                    v = (v + n.sample(rng)).max(0.0);
                }
                v
            }
        };
    }
    frame
}

/// One frame per ground-truth state. Frame `k` draws from sub-stream `k`, so the
/// result does not depend on `exec`.
pub fn render_sequence<R: Rng + ?Sized>(
    truth: &GroundTruth,
    cfg: &SceneConfig,
    exec: Execution,
    rng: &mut R,
) -> Result<Vec<ImageFrame>> {
    cfg.validate()?;
    let key = rng.random::<u64>();
    Ok(exec.map(truth.len(), |k| {
        let mut r = rng::substream(key, k as u64);
        render_noisy_frame(&truth.states[k], cfg, &mut r)
    }))
}

/// A generated scene: configuration, truth and frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub config: SceneConfig,
    pub truth: GroundTruth,
    pub frames: Vec<ImageFrame>,
}

/// Ground truth and frames from `cfg.seed` alone.
pub fn generate_sequence(cfg: &SceneConfig, exec: Execution) -> Result<Sequence> {
    let mut r = rng::master(cfg.seed);
    let truth = generate_truth(cfg, &mut r)?;
    let frames = render_sequence(&truth, cfg, exec, &mut r)?;
    Ok(Sequence {
        config: *cfg,
        truth,
        frames,
    })
}

/// SNR of a static spot measured from a stack of frames: `(mean peak - mean background) / std at peak`.
///
/// Peak statistics pool the `(2 * radius + 1)^2` pixels around `peak`, each centered on its
/// own temporal mean. Background pixels are those farther than `bg_distance` from `peak`.
pub fn measure_snr(frames: &[ImageFrame], peak: (usize, usize), radius: usize, bg_distance: f64) -> f64 {
    assert!(frames.len() >= 2, "need at least two frames");
    let f0 = &frames[0];
    let (px, py) = peak;
    let xs = px.saturating_sub(radius)..=(px + radius).min(f0.width() - 1);
    let ys = py.saturating_sub(radius)..=(py + radius).min(f0.height() - 1);

    let nf = frames.len() as f64;
    let (mut peak_sum, mut sq_dev, mut count) = (0.0, 0.0, 0usize);
    for y in ys {
        for x in xs.clone() {
            let mean = frames.iter().map(|f| f.get(x, y)).sum::<f64>() / nf;
            peak_sum += mean;
            sq_dev += frames.iter().map(|f| (f.get(x, y) - mean).powi(2)).sum::<f64>();
            count += 1;
        }
    }
    let mean_peak = peak_sum / count as f64;
    let std_peak = (sq_dev / (count as f64 * (nf - 1.0))).sqrt();

    let (mut bg_sum, mut bg_n) = (0.0, 0usize);
    for f in frames {
        for y in 0..f.height() {
            for x in 0..f.width() {
                let d = (x as f64 - px as f64).hypot(y as f64 - py as f64);
                if d > bg_distance {
                    bg_sum += f.get(x, y);
                    bg_n += 1;
                }
            }
        }
    }
    (mean_peak - bg_sum / bg_n as f64) / std_peak
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging;

    #[test]
    fn snr_calibration_examples() {
        let psf = PsfParams::new(1.16, 10.0).unwrap();
        let (i0, bg) = snr_calibrate(4.0, &psf);
        assert_eq!(bg, 10.0);
        // I0^2 = 16 (I0 + 10)
        let oracle = (16.0 + (256.0f64 + 640.0).sqrt()) / 2.0;
        assert!((i0 - oracle).abs() < 1e-12);
        assert!((i0 - 22.97).abs() < 5e-3);
        let (i0, _) = snr_calibrate(2.0, &psf);
        assert!((i0 - (4.0 + 176.0f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((i0 - 8.633).abs() < 1e-3);
        for s in [0.1, 1.0, 2.0, 4.0, 17.5] {
            let (i0, bg) = snr_calibrate(s, &psf);
            assert!((i0 / (i0 + bg).sqrt() - s).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_speed_steps() {
        let cfg = SceneConfig {
            speed_range: (2.0, 2.0),
            dynamics: DynamicsParams::noise_free(),
            ..SceneConfig::small_object(3)
        };
        let t = generate_truth(&cfg, &mut rng::master(3)).unwrap();
        assert_eq!(t.len(), 50);
        for w in t.states.windows(2) {
            assert!((w[0].position_error(&w[1]) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectories_stay_inside_margin() {
        let cfg = SceneConfig::large_object(1);
        let mut r = rng::master(1);
        for _ in 0..20 {
            let t = generate_truth(&cfg, &mut r).unwrap();
            assert!(t
                .states
                .iter()
                .all(|s| s.x >= 32.0 && s.x <= 479.0 && s.y >= 32.0 && s.y <= 479.0));
        }
    }

    #[test]
    fn impossible_scene_gives_up() {
        let cfg = SceneConfig {
            width: 40,
            height: 40,
            frames: 50,
            speed_range: (5.0, 5.0),
            margin: 4,
            ..SceneConfig::small_object(0)
        };
        assert!(matches!(
            generate_truth(&cfg, &mut rng::master(0)),
            Err(Error::TrajectoryRejected { .. })
        ));
    }

    #[test]
    fn noise_free_render_matches_model() {
        let cfg = SceneConfig {
            width: 48,
            height: 40,
            frames: 3,
            speed_range: (1.0, 1.0),
            noise: NoiseModel::None,
            ..SceneConfig::small_object(5)
        };
        let seq = generate_sequence(&cfg, Execution::Serial).unwrap();
        for (f, s) in seq.frames.iter().zip(&seq.truth.states) {
            let exact = imaging::render_frame(48, 40, s, &cfg.psf).unwrap();
            for (a, b) in f.pixels().iter().zip(exact.pixels()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rendering_is_deterministic_and_schedule_independent() {
        let cfg = SceneConfig {
            width: 64,
            height: 64,
            frames: 6,
            speed_range: (1.0, 2.0),
            ..SceneConfig::small_object(9)
        };
        let a = generate_sequence(&cfg, Execution::Serial).unwrap();
        let b = generate_sequence(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn background_mean_is_background_level() {
        let cfg = SceneConfig::small_object(11);
        let obj = StateVector::new(256.0, 256.0, 0.0, 0.0, 0.0);
        let f = render_noisy_frame(&obj, &cfg, &mut rng::master(11));
        let mean = f.pixels().iter().sum::<f64>() / f.pixels().len() as f64;
        assert!((mean - 10.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn read_noise_keeps_pixels_nonnegative() {
        let cfg = SceneConfig {
            width: 32,
            height: 32,
            noise: NoiseModel::Poisson { read_noise_std: 20.0 },
            ..SceneConfig::small_object(0)
        };
        let f = render_noisy_frame(&StateVector::new(16.0, 16.0, 0.0, 0.0, 5.0), &cfg, &mut rng::master(0));
        assert!(f.pixels().iter().all(|&v| v >= 0.0));
        assert!(f.pixels().iter().any(|&v| v.fract() != 0.0));
    }

    #[test]
    fn invalid_scenes_rejected() {
        let mut cfg = SceneConfig::small_object(0);
        cfg.snr = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SceneConfig::small_object(0);
        cfg.speed_range = (3.0, 2.0);
        assert!(cfg.validate().is_err());
        let mut cfg = SceneConfig::small_object(0);
        cfg.frames = 0;
        assert!(cfg.validate().is_err());
    }
}
