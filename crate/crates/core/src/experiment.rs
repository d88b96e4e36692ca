//! Benchmark experiments: tracking sweeps over N on synthetic sequences, and the
//! single-frame pseudo-tracking study.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ini::Ini;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::filter::{self, effective_sample_size, normalize, sir_track, FilterConfig, Trajectory};
use crate::imaging::{render_frame, GaussianPsfLikelihood, ImageFrame, LikelihoodParams};
use crate::piecewise::{self, pcsir_track, BinGrid, DummyPlacement, PcConfig};
use crate::rng;
use crate::state::{init_particle_set, DynamicsParams, InitSpec, StateVector};
use crate::synthesis::{self, SceneConfig};

const SCENE_STREAM: u64 = 0x5ce7e;
const FILTER_STREAM: u64 = 0xf117e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    LargeObject,
    SmallObject,
    PseudoTracking,
    BoundsStudy,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LargeObject => "large_object",
            ExperimentKind::SmallObject => "small_object",
            ExperimentKind::PseudoTracking => "pseudo_tracking",
            ExperimentKind::BoundsStudy => "bounds_study",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "large_object" | "large" => Ok(ExperimentKind::LargeObject),
            "small_object" | "small" => Ok(ExperimentKind::SmallObject),
            "pseudo_tracking" | "pseudo" => Ok(ExperimentKind::PseudoTracking),
            "bounds_study" | "bounds" => Ok(ExperimentKind::BoundsStudy),
            other => Err(Error::invalid("experiment", format!("unknown experiment {other:?}"))),
        }
    }
}

/// A filter to benchmark: exact SIR, or pcSIR with `subdivisions`^2 cells per pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Sir,
    Pc { subdivisions: u32, placement: DummyPlacement },
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Sir,
        Variant::Pc { subdivisions: 1, placement: DummyPlacement::CenterOfMass },
        Variant::Pc { subdivisions: 1, placement: DummyPlacement::CellCenter },
        Variant::Pc { subdivisions: 2, placement: DummyPlacement::CenterOfMass },
        Variant::Pc { subdivisions: 2, placement: DummyPlacement::CellCenter },
    ];

    pub fn is_sir(self) -> bool {
        self == Variant::Sir
    }

    pub fn pc_config(self, width: usize, height: usize) -> Result<Option<PcConfig>> {
        match self {
            Variant::Sir => Ok(None),
            Variant::Pc { subdivisions, placement } => Ok(Some(PcConfig::new(
                BinGrid::pixel_aligned(width, height, subdivisions)?,
                placement,
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Sir => f.write_str("SIR"),
            Variant::Pc { subdivisions, placement } => {
                let p = match placement {
                    DummyPlacement::CenterOfMass => "CoM",
                    DummyPlacement::CellCenter => "CoC",
                };
                write!(f, "pcSIR-{subdivisions}x{subdivisions}-{p}")
            }
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("variant", format!("unknown variant {s:?}")))
    }
}

/// Initial particle spread around the true start position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prior {
    Point,
    Uniform3x3,
    Uniform5x5,
    Gauss(f64),
}

impl Prior {
    pub const PSEUDO: [Prior; 4] = [Prior::Uniform3x3, Prior::Uniform5x5, Prior::Gauss(0.5), Prior::Gauss(0.8)];

    pub fn init(self, center: StateVector) -> InitSpec {
        match self {
            Prior::Point => InitSpec::Point(center),
            Prior::Uniform3x3 => InitSpec::UniformBox { center, half_width: 1.5, half_height: 1.5 },
            Prior::Uniform5x5 => InitSpec::UniformBox { center, half_width: 2.5, half_height: 2.5 },
            Prior::Gauss(sigma) => InitSpec::Gaussian { center, sigma },
        }
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Point => f.write_str("point"),
            Prior::Uniform3x3 => f.write_str("uniform3x3"),
            Prior::Uniform5x5 => f.write_str("uniform5x5"),
            Prior::Gauss(s) => write!(f, "gauss({s})"),
        }
    }
}

impl FromStr for Prior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid("prior", format!("unknown prior {s:?}"));
        match s {
            "point" => Ok(Prior::Point),
            "uniform3x3" => Ok(Prior::Uniform3x3),
            "uniform5x5" => Ok(Prior::Uniform5x5),
            _ => {
                let inner = s.strip_prefix("gauss(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
                let sigma: f64 = inner.trim().parse().map_err(|_| bad())?;
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(Prior::Gauss(sigma))
                } else {
                    Err(Error::invalid("prior", "gauss sigma must be > 0"))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_particles: Vec<usize>,
    pub repetitions: usize,
    pub variants: Vec<Variant>,
    pub prior: Prior,
    pub sigma_xi: f64,
    pub seed: u64,
    /// Scene template; its seed is replaced per repetition.
    pub scene: SceneConfig,
    /// Dynamics assumed by the filters.
    pub dynamics: DynamicsParams,
    pub execution: Execution,
    /// Record wall times. When off, time columns are zero and the output is fully reproducible.
    pub timing: bool,
}

fn doubling(from: usize, to: usize) -> Vec<usize> {
    std::iter::successors(Some(from), |&n| Some(n * 2)).take_while(|&n| n <= to).collect()
}

/// Filter dynamics used by the tracking presets.
pub fn tracking_dynamics() -> DynamicsParams {
    DynamicsParams {
        sigma_pos: 0.25,
        sigma_vel: 0.25,
        sigma_int: 0.0,
        dt: 1.0,
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults, or the full sweep sizes with `full_scale`.
    pub fn preset(kind: ExperimentKind, full_scale: bool) -> Self {
        let base = Self {
            kind,
            n_particles: Vec::new(),
            repetitions: 20,
            variants: vec![
                Variant::Sir,
                Variant::Pc { subdivisions: 1, placement: DummyPlacement::CenterOfMass },
                Variant::Pc { subdivisions: 2, placement: DummyPlacement::CenterOfMass },
            ],
            prior: Prior::Point,
            sigma_xi: 10.0,
            seed: 0,
            scene: SceneConfig::small_object(0),
            dynamics: tracking_dynamics(),
            execution: Execution::default(),
            timing: true,
        };
        match kind {
            ExperimentKind::LargeObject => Self {
                n_particles: doubling(100, 12_800),
                repetitions: if full_scale { 50 } else { 20 },
                scene: SceneConfig::large_object(0),
                ..base
            },
            ExperimentKind::SmallObject => Self {
                n_particles: doubling(8_000, if full_scale { 1_024_000 } else { 128_000 }),
                repetitions: if full_scale { 50 } else { 20 },
                ..base
            },
            ExperimentKind::PseudoTracking => Self {
                n_particles: doubling(1_000, 16_000),
                repetitions: if full_scale { 1000 } else { 100 },
                variants: Variant::ALL.to_vec(),
                prior: Prior::Uniform3x3,
                sigma_xi: 20.0,
                ..base
            },
            ExperimentKind::BoundsStudy => Self {
                n_particles: vec![1],
                repetitions: 1,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles.is_empty() {
            return Err(Error::invalid("particles", "need at least one particle count"));
        }
        if self.n_particles[0] == 0 || self.n_particles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("particles", "counts must be positive and strictly increasing"));
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("variants", "need at least one filter variant"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be >= 1"));
        }
        if !(self.sigma_xi > 0.0 && self.sigma_xi.is_finite()) {
            return Err(Error::invalid("sigma_xi", format!("must be > 0, got {}", self.sigma_xi)));
        }
        if self.kind == ExperimentKind::PseudoTracking && self.prior == Prior::Point {
            return Err(Error::invalid("prior", "pseudo-tracking needs a spread prior"));
        }
        self.dynamics.validate()?;
        self.scene.validate()
    }

    pub fn likelihood(&self) -> Result<GaussianPsfLikelihood> {
        let halfwidth = self.scene.margin;
        GaussianPsfLikelihood::new(
            self.scene.psf,
            LikelihoodParams { sigma_xi: self.sigma_xi, window_halfwidth: halfwidth },
        )
    }

    /// Reads an INI-style file with an `[experiment]` section and optional `[scene]` and
    /// `[dynamics]` sections. Missing keys keep the preset for the given experiment kind.
    pub fn from_ini_file(path: &Path, full_scale: bool) -> Result<Self> {
        let ini = Ini::load_from_file(path).map_err(|e| match e {
            ini::Error::Io(io) => Error::io(path, io),
            ini::Error::Parse(p) => Error::invalid("config", format!("{}: {p}", path.display())),
        })?;
        Self::from_ini(&ini, full_scale)
    }

    pub fn from_ini(ini: &Ini, full_scale: bool) -> Result<Self> {
        let get = |section: &str, key: &str| ini.get_from(Some(section), key).map(str::trim);
        let kind: ExperimentKind = get("experiment", "kind")
            .ok_or_else(|| Error::invalid("kind", "missing [experiment] kind"))?
            .parse()?;
        let mut cfg = Self::preset(kind, full_scale);
        if let Some(v) = get("experiment", "particles") {
            cfg.n_particles = parse_list(v, "particles")?;
        }
        if let Some(v) = get("experiment", "repetitions") {
            cfg.repetitions = parse_value(v, "repetitions")?;
        }
        if let Some(v) = get("experiment", "variants") {
            cfg.variants = parse_list(v, "variants")?;
        }
        if let Some(v) = get("experiment", "prior") {
            cfg.prior = v.parse()?;
        }
        if let Some(v) = get("experiment", "sigma_xi") {
            cfg.sigma_xi = parse_value(v, "sigma_xi")?;
        }
        if let Some(v) = get("experiment", "seed") {
            cfg.seed = parse_value(v, "seed")?;
        }
        if let Some(v) = get("experiment", "timing") {
            cfg.timing = parse_value(v, "timing")?;
        }
        if let Some(v) = get("experiment", "execution") {
            cfg.execution = match v {
                "serial" => Execution::Serial,
                "parallel" => Execution::Parallel,
                other => return Err(Error::invalid("execution", format!("unknown mode {other:?}"))),
            };
        }
        let sc = &mut cfg.scene;
        for (key, slot) in [("frames", &mut sc.frames), ("width", &mut sc.width), ("height", &mut sc.height), ("margin", &mut sc.margin)] {
            if let Some(v) = get("scene", key) {
                *slot = parse_value(v, "scene")?;
            }
        }
        for (key, slot) in [("snr", &mut sc.snr), ("sigma_psf", &mut sc.psf.sigma_psf), ("i_bg", &mut sc.psf.i_bg)] {
            if let Some(v) = get("scene", key) {
                *slot = parse_value(v, "scene")?;
            }
        }
        let d = &mut cfg.dynamics;
        for (key, slot) in [("sigma_pos", &mut d.sigma_pos), ("sigma_vel", &mut d.sigma_vel), ("sigma_int", &mut d.sigma_int), ("dt", &mut d.dt)] {
            if let Some(v) = get("dynamics", key) {
                *slot = parse_value(v, "dynamics")?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value<T: FromStr>(v: &str, name: &'static str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::invalid(name, format!("cannot parse {v:?}")))
}

/// Comma-separated list, e.g. `100,200,400` or `SIR,pcSIR-1x1-CoM`.
pub fn parse_list<T: FromStr>(v: &str, name: &'static str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(s, name))
        .collect()
}

/// One (variant, N, repetition) run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub variant: Variant,
    pub n_particles: usize,
    pub repetition: usize,
    /// NaN when the run failed.
    pub rmse: f64,
    pub time_s: f64,
    pub likelihood_evaluations: u64,
    pub estimates: Vec<StateVector>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub experiment: ExperimentKind,
    pub records: Vec<RunRecord>,
}

/// Mean and standard deviation per (variant, N), over successful repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub variant: String,
    pub n_particles: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub time_mean_s: f64,
    pub time_std_s: f64,
    pub lik_evals_mean: f64,
    /// Mean SIR time over mean variant time at the same N; NaN without SIR or timing.
    pub speedup_vs_sir: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

impl RunResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.failure.is_some()).count()
    }

    /// Records of one variant at one N, in repetition order.
    pub fn runs(&self, variant: Variant, n: usize) -> impl Iterator<Item = &RunRecord> + '_ {
        self.records.iter().filter(move |r| r.variant == variant && r.n_particles == n)
    }

    /// Rows ordered by first appearance of the variant, then by N.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut variants: Vec<Variant> = Vec::new();
        let mut ns: Vec<usize> = Vec::new();
        for r in &self.records {
            if !variants.contains(&r.variant) {
                variants.push(r.variant);
            }
            if !ns.contains(&r.n_particles) {
                ns.push(r.n_particles);
            }
        }
        ns.sort_unstable();
        let stats = |v: Variant, n: usize| {
            let ok: Vec<&RunRecord> = self.runs(v, n).filter(|r| r.failure.is_none()).collect();
            let pick = |f: fn(&RunRecord) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            (
                pick(|r| r.rmse),
                pick(|r| r.time_s),
                pick(|r| r.likelihood_evaluations as f64).0,
                ok.len(),
            )
        };
        let mut rows = Vec::new();
        for &v in &variants {
            for &n in &ns {
                let ((rm, rs), (tm, ts), ev, count) = stats(v, n);
                if count == 0 && self.runs(v, n).next().is_none() {
                    continue;
                }
                let speedup = if v.is_sir() && tm > 0.0 {
                    1.0
                } else {
                    let ((_, _), (sir_t, _), _, sir_n) = stats(Variant::Sir, n);
                    if sir_n > 0 && tm > 0.0 && sir_t > 0.0 { sir_t / tm } else { f64::NAN }
                };
                rows.push(SummaryRow {
                    experiment: self.experiment.name().to_string(),
                    variant: v.to_string(),
                    n_particles: n,
                    rmse_mean: rm,
                    rmse_std: rs,
                    time_mean_s: tm,
                    time_std_s: ts,
                    lik_evals_mean: ev,
                    speedup_vs_sir: speedup,
                });
            }
        }
        rows
    }
}

fn run_filter(
    variant: Variant,
    frames: &[ImageFrame],
    lik: &GaussianPsfLikelihood,
    fc: &FilterConfig,
    seed: u64,
) -> Result<Trajectory> {
    let mut r = rng::master(seed);
    let (w, h) = (frames[0].width(), frames[0].height());
    match variant.pc_config(w, h)? {
        None => sir_track(frames, lik, fc, &mut r),
        Some(pc) => pcsir_track(frames, lik, fc, &pc, &mut r),
    }
}

fn failed_record(variant: Variant, n: usize, rep: usize, e: &Error) -> RunRecord {
    RunRecord {
        variant,
        n_particles: n,
        repetition: rep,
        rmse: f64::NAN,
        time_s: 0.0,
        likelihood_evaluations: 0,
        estimates: Vec::new(),
        failure: Some(e.to_string()),
    }
}

/// Seed of the sequence for repetition `rep`.
pub fn scene_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    rng::derive_seed(cfg.seed, &[SCENE_STREAM, rep as u64])
}

/// Seed of the filter run at (`n`, `rep`); shared by all variants so they see the same draws.
pub fn filter_seed(cfg: &ExperimentConfig, n: usize, rep: usize) -> u64 {
    rng::derive_seed(cfg.seed, &[FILTER_STREAM, n as u64, rep as u64])
}

/// Generates one sequence per repetition and tracks it with every variant and N.
/// Filters start from the prior around the true first state and track frames 1 onwards;
/// RMSE is taken over those frames. Failed runs are recorded, not fatal.
pub fn run_tracking_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_tracking_with(cfg, |_| {})
}

/// As [`run_tracking_experiment`], calling `progress` after every run.
pub fn run_tracking_with<P: FnMut(&RunRecord)>(cfg: &ExperimentConfig, mut progress: P) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.scene.frames < 2 {
        return Err(Error::invalid("frames", "tracking needs at least two frames"));
    }
    let lik = cfg.likelihood()?;
    let mut records = Vec::new();
    for rep in 0..cfg.repetitions {
        let scene = SceneConfig { seed: scene_seed(cfg, rep), ..cfg.scene };
        let seq = synthesis::generate_sequence(&scene, cfg.execution)?;
        let truth = &seq.truth.states[1..];
        let frames = &seq.frames[1..];
        for &n in &cfg.n_particles {
            let mut fc = FilterConfig::new(n, cfg.prior.init(seq.truth.states[0]));
            fc.dynamics = cfg.dynamics;
            fc.execution = cfg.execution;
            for &variant in &cfg.variants {
                let start = Instant::now();
                let out = run_filter(variant, frames, &lik, &fc, filter_seed(cfg, n, rep));
                let elapsed = start.elapsed().as_secs_f64();
                let rec = match out {
                    Ok(t) => RunRecord {
                        variant,
                        n_particles: n,
                        repetition: rep,
                        rmse: t.rmse(truth),
                        time_s: if cfg.timing { elapsed } else { 0.0 },
                        likelihood_evaluations: t.likelihood_evaluations,
                        estimates: t.estimates,
                        failure: None,
                    },
                    Err(e) => failed_record(variant, n, rep, &e),
                };
                progress(&rec);
                records.push(rec);
            }
        }
    }
    Ok(RunResult { experiment: cfg.kind, records })
}

/// Frame size and object used by pseudo-tracking: a noise-free spot at a pixel center.
pub fn pseudo_scene(cfg: &ExperimentConfig) -> Result<(ImageFrame, StateVector)> {
    let psf = cfg.scene.psf;
    let (i0, _) = synthesis::snr_calibrate(cfg.scene.snr, &psf);
    let half = cfg.scene.margin + 12;
    let size = 2 * half + 1;
    let object = StateVector::new(half as f64, half as f64, 0.0, 0.0, i0);
    Ok((render_frame(size, size, &object, &psf)?, object))
}

/// Single weighting step from the prior, without dynamics or resampling.
/// Returns the posterior-mean estimate and the number of likelihood evaluations.
pub fn pseudo_estimate(
    variant: Variant,
    frame: &ImageFrame,
    lik: &GaussianPsfLikelihood,
    init: &InitSpec,
    n: usize,
    exec: Execution,
    seed: u64,
) -> Result<(StateVector, u64)> {
    let mut r = rng::master(seed);
    let mut set = init_particle_set(n, init, &mut r)?;
    let evals = match variant.pc_config(frame.width(), frame.height())? {
        None => filter::weight_exact(&mut set, frame, lik, exec)?,
        Some(pc) => piecewise::weight_piecewise(&mut set, frame, lik, &pc, exec)?,
    };
    normalize(&mut set)?;
    debug_assert!(effective_sample_size(&set) >= 1.0 - 1e-9);
    Ok((set.weighted_mean(), evals))
}

/// Pseudo-tracking sweep. Each record holds the position error of one repetition in `rmse`;
/// the summary's `rmse_mean` is therefore a mean absolute error, use [`pseudo_rmse`] for the RMSE.
pub fn run_pseudo_tracking(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let lik = cfg.likelihood()?;
    let (frame, object) = pseudo_scene(cfg)?;
    let init = cfg.prior.init(object);
    let mut records = Vec::new();
    for &n in &cfg.n_particles {
        for rep in 0..cfg.repetitions {
            for &variant in &cfg.variants {
                let start = Instant::now();
                let out = pseudo_estimate(variant, &frame, &lik, &init, n, cfg.execution, filter_seed(cfg, n, rep));
                let elapsed = start.elapsed().as_secs_f64();
                records.push(match out {
                    Ok((est, evals)) => RunRecord {
                        variant,
                        n_particles: n,
                        repetition: rep,
                        rmse: est.position_error(&object),
                        time_s: if cfg.timing { elapsed } else { 0.0 },
                        likelihood_evaluations: evals,
                        estimates: vec![est],
                        failure: None,
                    },
                    Err(e) => failed_record(variant, n, rep, &e),
                });
            }
        }
    }
    Ok(RunResult { experiment: cfg.kind, records })
}

/// Root-mean-square of the per-repetition errors of one variant at one N.
pub fn pseudo_rmse(result: &RunResult, variant: Variant, n: usize) -> f64 {
    let errs: Vec<f64> = result.runs(variant, n).filter(|r| r.failure.is_none()).map(|r| r.rmse).collect();
    (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}
