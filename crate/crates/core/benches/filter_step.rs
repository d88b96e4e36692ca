use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

use pcsir::filter::sis_step;
use pcsir::imaging::{render_frame, GaussianPsfLikelihood, LikelihoodParams};
use pcsir::piecewise::{pc_sis_step, BinGrid, DummyPlacement, PcConfig};
use pcsir::state::init_particle_set;
use pcsir::synthesis::SceneConfig;
use pcsir::{rng, DynamicsParams, Execution, InitSpec, StateVector};

fn filter_step(c: &mut Criterion) {
    let scene = SceneConfig::large_object(0);
    let (i0, _) = scene.intensities();
    let truth = StateVector::new(256.0, 256.0, 3.0, 0.0, i0);
    let frame = render_frame(512, 512, &truth, &scene.psf).unwrap();
    let lik = GaussianPsfLikelihood::new(scene.psf, LikelihoodParams { sigma_xi: 10.0, window_halfwidth: 32 }).unwrap();
    let dynamics = DynamicsParams { sigma_pos: 0.25, sigma_vel: 0.25, sigma_int: 0.0, dt: 1.0 };
    let pc = PcConfig::new(BinGrid::pixel_aligned(512, 512, 1).unwrap(), DummyPlacement::CenterOfMass);
    let init = InitSpec::UniformBox { center: truth, half_width: 2.0, half_height: 2.0 };

    let mut group = c.benchmark_group("filter_step");
    group.sample_size(10);
    for n in [1_000usize, 12_800] {
        let set = init_particle_set(n, &init, &mut rng::master(1)).unwrap();
        for (label, exec) in [("serial", Execution::Serial), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(format!("sir/{label}"), n), &n, |b, _| {
                let mut r = rng::master(2);
                b.iter_batched(
                    || set.clone(),
                    |mut s| sis_step(&mut s, &frame, &lik, &dynamics, exec, &mut r).unwrap(),
                    BatchSize::LargeInput,
                )
            });
            group.bench_with_input(BenchmarkId::new(format!("pcsir-1x1/{label}"), n), &n, |b, _| {
                let mut r = rng::master(2);
                b.iter_batched(
                    || set.clone(),
                    |mut s| pc_sis_step(&mut s, &frame, &lik, &dynamics, &pc, exec, &mut r).unwrap(),
                    BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

criterion_group!(benches, filter_step);
criterion_main!(benches);
