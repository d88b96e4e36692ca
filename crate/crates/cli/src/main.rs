use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcsir::bounds::{self, STUDY_CELL_SIZES};
use pcsir::experiment::{
    self, parse_list, ExperimentConfig, ExperimentKind, Prior, RunResult, SummaryRow, Variant,
};
use pcsir::synthesis::{self, io as scene_io, SceneConfig};
use pcsir::{report, Error, Execution};

/// Benchmarks for SIR and piecewise-constant SIR particle filters on synthetic microscopy data.
#[derive(Parser)]
#[command(name = "pcsir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic image sequences (PGM frames, truth.csv, scene.txt)
    Generate {
        #[command(flatten)]
        common: Common,
        /// large_object or small_object
        #[arg(long, default_value = "small_object")]
        experiment: String,
        /// Number of sequences
        #[arg(long, default_value_t = 1)]
        scenes: usize,
    },
    /// Tracking sweep over N on synthetic sequences
    Track {
        #[command(flatten)]
        common: Common,
        /// large_object or small_object
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Single-frame pseudo-tracking convergence study
    Pseudo {
        #[command(flatten)]
        common: Common,
        /// Priors to sweep, e.g. uniform3x3,gauss(0.5); all four by default
        #[arg(long)]
        priors: Option<String>,
    },
    /// Mid-point error bounds against the quadrature oracle
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Re-render plots from a summary CSV
    Report {
        #[command(flatten)]
        common: Common,
        /// Summary CSV written by `track` or `pseudo`
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// INI-style experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Comma-separated filter variants, e.g. SIR,pcSIR-1x1-CoM
    #[arg(long)]
    variants: Option<String>,
    /// Comma-separated, strictly increasing particle counts
    #[arg(long)]
    particles: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// Full-size sweeps and repetition counts
    #[arg(long)]
    full_scale: bool,
    /// Run per-particle work on the calling thread only
    #[arg(long)]
    serial: bool,
    /// Record zero wall times so that output files are reproducible byte for byte
    #[arg(long)]
    no_timing: bool,
}

impl Common {
    fn config(&self, default_kind: ExperimentKind, kind: Option<&str>) -> pcsir::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_ini_file(path, self.full_scale)?,
            None => ExperimentConfig::preset(default_kind, self.full_scale),
        };
        if let Some(k) = kind {
            let k: ExperimentKind = k.parse()?;
            if k != cfg.kind {
                let seed = cfg.seed;
                cfg = ExperimentConfig { seed, ..ExperimentConfig::preset(k, self.full_scale) };
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(v) = &self.variants {
            cfg.variants = parse_list::<Variant>(v, "variants")?;
        }
        if let Some(p) = &self.particles {
            cfg.n_particles = parse_list(p, "particles")?;
        }
        if let Some(r) = self.reps {
            cfg.repetitions = r;
        }
        if self.serial {
            cfg.execution = Execution::Serial;
        }
        if self.no_timing {
            cfg.timing = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> pcsir::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn write_runs_csv(path: &Path, label: &str, result: &RunResult) -> pcsir::Result<()> {
    let mut text = String::from("experiment,variant,N,repetition,rmse,time_s,lik_evals,failure\n");
    for r in &result.records {
        text.push_str(&format!(
            "{label},{},{},{},{},{},{},{}\n",
            r.variant,
            r.n_particles,
            r.repetition,
            r.rmse,
            r.time_s,
            r.likelihood_evaluations,
            r.failure.as_deref().unwrap_or("").replace(',', ";")
        ));
    }
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn print_summary(rows: &[SummaryRow]) {
    println!("{:<28} {:<15} {:>8} {:>10} {:>10} {:>12} {:>9}", "experiment", "variant", "N", "rmse", "time_s", "lik_evals", "speedup");
    for r in rows {
        println!(
            "{:<28} {:<15} {:>8} {:>10.4} {:>10.4} {:>12.0} {:>9.2}",
            r.experiment, r.variant, r.n_particles, r.rmse_mean, r.time_mean_s, r.lik_evals_mean, r.speedup_vs_sir
        );
    }
}

fn finish(out: &Path, stem: &str, rows: &[SummaryRow]) -> pcsir::Result<()> {
    let csv = out.join(format!("{stem}_summary.csv"));
    report::write_summary_csv(&csv, rows)?;
    report::write_plots(out, rows)?;
    print_summary(rows);
    eprintln!("wrote {}", csv.display());
    Ok(())
}

fn generate(common: &Common, experiment: &str, scenes: usize) -> pcsir::Result<()> {
    let kind: ExperimentKind = experiment.parse()?;
    let template = match kind {
        ExperimentKind::LargeObject => SceneConfig::large_object(0),
        ExperimentKind::SmallObject => SceneConfig::small_object(0),
        _ => return Err(Error::invalid("experiment", "generate supports large_object and small_object")),
    };
    let cfg = ExperimentConfig { scene: template, ..common.config(kind, None)? };
    for k in 0..scenes {
        let scene = SceneConfig { seed: experiment::scene_seed(&cfg, k), ..cfg.scene };
        let seq = synthesis::generate_sequence(&scene, cfg.execution)?;
        let dir = common.out.join(format!("{}_{k:03}", kind.name()));
        scene_io::write_sequence(&dir, &seq)?;
        eprintln!("wrote {}", dir.display());
    }
    Ok(())
}

fn track(common: &Common, experiment: Option<&str>) -> pcsir::Result<()> {
    let cfg = common.config(ExperimentKind::LargeObject, experiment)?;
    if !matches!(cfg.kind, ExperimentKind::LargeObject | ExperimentKind::SmallObject) {
        return Err(Error::invalid("experiment", "track supports large_object and small_object"));
    }
    create_dir(&common.out)?;
    let result = experiment::run_tracking_with(&cfg, |r| {
        eprintln!(
            "{} N={} rep={} rmse={:.4} time={:.3}s evals={}{}",
            r.variant,
            r.n_particles,
            r.repetition,
            r.rmse,
            r.time_s,
            r.likelihood_evaluations,
            r.failure.as_deref().map(|f| format!(" FAILED: {f}")).unwrap_or_default()
        )
    })?;
    let name = cfg.kind.name();
    write_runs_csv(&common.out.join(format!("{name}_runs.csv")), name, &result)?;
    finish(&common.out, name, &result.summary())
}

fn pseudo(common: &Common, priors: Option<&str>) -> pcsir::Result<()> {
    let base = common.config(ExperimentKind::PseudoTracking, Some("pseudo_tracking"))?;
    let priors: Vec<Prior> = match priors {
        Some(list) => parse_list(list, "priors")?,
        None => Prior::PSEUDO.to_vec(),
    };
    create_dir(&common.out)?;
    let mut rows = Vec::new();
    for prior in priors {
        let cfg = ExperimentConfig { prior, ..base.clone() };
        let result = experiment::run_pseudo_tracking(&cfg)?;
        let label = format!("pseudo_{prior}").replace(['(', ')'], "");
        write_runs_csv(&common.out.join(format!("{label}_runs.csv")), &label, &result)?;
        for mut row in result.summary() {
            let v: Variant = row.variant.parse()?;
            // per-repetition records hold errors; report the root mean square
            row.rmse_mean = experiment::pseudo_rmse(&result, v, row.n_particles);
            row.experiment = label.clone();
            rows.push(row);
        }
        eprintln!("finished prior {prior}");
    }
    finish(&common.out, "pseudo_tracking", &rows)
}

fn bounds_cmd(common: &Common) -> pcsir::Result<()> {
    create_dir(&common.out)?;
    let exec = if common.serial { Execution::Serial } else { Execution::default() };
    let rows = bounds::bounds_study(&STUDY_CELL_SIZES, exec)?;
    let path = common.out.join("bounds.csv");
    report::write_bounds_csv(&path, &rows)?;
    println!("{:<10} {:>8} {:>14} {:>14} {:>14}", "field", "l", "true_error", "rect_bound", "square_bound");
    for r in &rows {
        println!("{:<10} {:>8} {:>14.6e} {:>14.6e} {:>14.6e}", r.field, r.cell_size, r.true_error, r.rect_bound, r.square_bound);
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn report_cmd(common: &Common, input: &Path) -> pcsir::Result<()> {
    let rows = report::read_summary_csv(input)?;
    if rows.is_empty() {
        return Err(Error::invalid("input", format!("{} has no rows", input.display())));
    }
    for p in report::write_plots(&common.out, &rows)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> pcsir::Result<()> {
    match &cli.command {
        Command::Generate { common, experiment, scenes } => generate(common, experiment, *scenes),
        Command::Track { common, experiment } => track(common, experiment.as_deref()),
        Command::Pseudo { common, priors } => pseudo(common, priors.as_deref()),
        Command::Bounds { common } => bounds_cmd(common),
        Command::Report { common, input } => report_cmd(common, input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
