use std::fs;

use pcsir::experiment::{
    pseudo_rmse, run_pseudo_tracking, run_tracking_experiment, ExperimentConfig, ExperimentKind, Prior, Variant,
};
use pcsir::filter::{sir_track, FilterConfig};
use pcsir::piecewise::{pcsir_track, BinGrid, DummyPlacement, PcConfig};
use pcsir::report;
use pcsir::synthesis::{self, io, SceneConfig};
use pcsir::{rng, Execution, InitSpec};

fn quick(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(kind, false);
    cfg.repetitions = 2;
    cfg.timing = false;
    cfg.variants = Variant::ALL.to_vec();
    cfg
}

#[test]
fn small_object_is_tracked_below_half_a_pixel() {
    let mut cfg = quick(ExperimentKind::SmallObject);
    cfg.n_particles = vec![2000];
    let res = run_tracking_experiment(&cfg).unwrap();
    assert_eq!(res.failures(), 0);
    for r in res.runs(Variant::Sir, 2000) {
        assert!(r.rmse < 0.5, "rep {}: {}", r.repetition, r.rmse);
    }
}

#[test]
fn large_object_is_tracked_below_one_pixel() {
    let mut cfg = quick(ExperimentKind::LargeObject);
    cfg.n_particles = vec![3200];
    cfg.repetitions = 1;
    cfg.variants = vec![Variant::Sir, Variant::ALL[1]];
    let res = run_tracking_experiment(&cfg).unwrap();
    for r in &res.records {
        assert!(r.rmse < 1.0, "{} {}", r.variant, r.rmse);
    }
    let sir = res.runs(Variant::Sir, 3200).next().unwrap().likelihood_evaluations;
    let pc = res.runs(Variant::ALL[1], 3200).next().unwrap().likelihood_evaluations;
    assert_eq!(sir, 3200 * 49);
    assert!(pc * 3 <= sir, "{pc} vs {sir}");
}

#[test]
fn piecewise_never_evaluates_more_than_sir() {
    let mut cfg = quick(ExperimentKind::SmallObject);
    cfg.n_particles = vec![100, 400, 1600];
    cfg.scene.frames = 10;
    let res = run_tracking_experiment(&cfg).unwrap();
    for n in [100, 400, 1600] {
        let sir = res.runs(Variant::Sir, n).map(|r| r.likelihood_evaluations).max().unwrap();
        for v in &Variant::ALL[1..] {
            assert!(res.runs(*v, n).all(|r| r.likelihood_evaluations <= sir));
        }
    }
}

#[test]
fn fixed_seed_gives_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(ExperimentKind::SmallObject);
    cfg.n_particles = vec![200, 400];
    cfg.scene.frames = 8;
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let res = run_tracking_experiment(&cfg).unwrap();
        report::write_summary_csv(p, &res.summary()).unwrap();
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
}

#[test]
fn serial_and_parallel_runs_agree() {
    let mut cfg = quick(ExperimentKind::SmallObject);
    cfg.n_particles = vec![300];
    cfg.scene.frames = 8;
    cfg.execution = Execution::Serial;
    let a = run_tracking_experiment(&cfg).unwrap();
    cfg.execution = Execution::Parallel;
    let b = run_tracking_experiment(&cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tracking_a_sequence_read_from_disk_matches_memory() {
    let scene = SceneConfig { width: 96, height: 96, frames: 12, ..SceneConfig::small_object(77) };
    let seq = synthesis::generate_sequence(&scene, Execution::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    io::write_sequence(dir.path(), &seq).unwrap();
    let disk = io::read_sequence(dir.path()).unwrap();

    let cfg = ExperimentConfig::preset(ExperimentKind::SmallObject, false);
    let lik = cfg.likelihood().unwrap();
    let mut fc = FilterConfig::new(500, InitSpec::Point(seq.truth.states[0]));
    fc.dynamics = cfg.dynamics;
    let pc = PcConfig::new(BinGrid::pixel_aligned(96, 96, 2).unwrap(), DummyPlacement::CenterOfMass);
    let a = pcsir_track(&seq.frames[1..], &lik, &fc, &pc, &mut rng::master(5)).unwrap();
    let b = pcsir_track(&disk.frames[1..], &lik, &fc, &pc, &mut rng::master(5)).unwrap();
    assert_eq!(a, b);
    let c = sir_track(&disk.frames[1..], &lik, &fc, &mut rng::master(5)).unwrap();
    assert!(c.rmse(&disk.truth.states[1..]) < 0.5);
}

#[test]
fn pseudo_tracking_error_shrinks_with_n() {
    let mut cfg = quick(ExperimentKind::PseudoTracking);
    cfg.n_particles = vec![500, 8000];
    cfg.repetitions = 60;
    cfg.prior = Prior::Uniform5x5;
    let res = run_pseudo_tracking(&cfg).unwrap();
    for v in Variant::ALL {
        let (small, large) = (pseudo_rmse(&res, v, 500), pseudo_rmse(&res, v, 8000));
        // sixteen times the particles: a quarter of the error, give or take sampling noise
        let ratio = large / small;
        assert!((0.15..0.4).contains(&ratio), "{v}: {ratio}");
    }
}

#[test]
fn com_and_coc_pseudo_errors_are_comparable() {
    let mut cfg = quick(ExperimentKind::PseudoTracking);
    cfg.n_particles = vec![2000];
    cfg.repetitions = 100;
    let (mut com, mut coc) = (0.0, 0.0);
    for prior in Prior::PSEUDO {
        cfg.prior = prior;
        let res = run_pseudo_tracking(&cfg).unwrap();
        com += pseudo_rmse(&res, Variant::ALL[1], 2000) + pseudo_rmse(&res, Variant::ALL[3], 2000);
        coc += pseudo_rmse(&res, Variant::ALL[2], 2000) + pseudo_rmse(&res, Variant::ALL[4], 2000);
    }
    assert!((com / coc - 1.0).abs() < 0.05, "CoM/CoC = {}", com / coc);
}
