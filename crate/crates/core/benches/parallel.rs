use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use measure_scale::cylinder::{
    cantor_self_similarity_residual, level_sweep, partition_identity_residual, sample_trajectories,
};
use measure_scale::filter::taps_from_beta;
use measure_scale::scale::{empirical_scale_profile, ScaleOptions};
use measure_scale::system::Builtin;
use measure_scale::{MeasurementSystem, PureState};
use rayon::{ThreadPool, ThreadPoolBuilder};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    vec![
        ("sequential", ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn workloads(c: &mut Criterion) {
    let beta = MeasurementSystem::from_filter_bank(&taps_from_beta(0.3)).unwrap();
    let e0 = PureState::basis(3, 0);
    let leb = MeasurementSystem::builtin(Builtin::Lebesgue2);
    let leb_e0 = PureState::basis(2, 0);

    for (name, pool) in pools() {
        let mut g = c.benchmark_group("partition_identity_k12");
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| partition_identity_residual(black_box(&beta), 12).unwrap()))
        });
        g.finish();

        let mut g = c.benchmark_group("scale_profile_k14");
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                pool.install(|| {
                    empirical_scale_profile(black_box(&beta), &e0, 14, &ScaleOptions::default()).unwrap()
                })
            })
        });
        g.finish();

        let mut g = c.benchmark_group("level_sweep_k14");
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| level_sweep(black_box(&beta), &e0, 14).unwrap()))
        });
        g.finish();

        let mut g = c.benchmark_group("sample_trajectories_1e4");
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| sample_trajectories(black_box(&leb), &leb_e0, 16, 10_000, 3).unwrap()))
        });
        g.finish();

        let mut g = c.benchmark_group("cantor_self_similarity_k8");
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| cantor_self_similarity_residual(black_box(8)).unwrap()))
        });
        g.finish();
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = workloads
}
criterion_main!(benches);
