use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use pvdp_core::client_filter::{filter_stream, group_by_device};
use pvdp_core::noise::{NoiseSpec, RngStream};
use pvdp_core::synth::{self, WorkloadSpec};
use pvdp_core::{release_current, CurrentRunConfig};

fn samplers(c: &mut Criterion) {
    let mut g = c.benchmark_group("samplers");
    g.throughput(Throughput::Elements(1));
    for (name, spec) in [
        (
            "discrete_gaussian/sigma=18.26",
            NoiseSpec::discrete_gaussian(18.2574).unwrap(),
        ),
        (
            "geometric/lambda=30",
            NoiseSpec::two_sided_geometric(30.0).unwrap(),
        ),
        (
            "geometric/lambda=300",
            NoiseSpec::two_sided_geometric(300.0).unwrap(),
        ),
    ] {
        let s = spec.sampler();
        let mut rng = RngStream::new(1, 0).rng();
        g.bench_function(name, |b| b.iter(|| black_box(s.sample(&mut rng))));
    }
    g.finish();
}

fn workload() -> synth::Workload {
    let spec = WorkloadSpec {
        n_devices: 20_000,
        n_pages: 2000,
        seed: 9,
        ..WorkloadSpec::default()
    };
    synth::generate(&spec).unwrap()
}

fn filter(c: &mut Criterion) {
    let w = workload();
    let devices = group_by_device(w.events.clone());
    let mut g = c.benchmark_group("filter");
    g.throughput(Throughput::Elements(w.events.len() as u64));
    g.sample_size(20);
    g.bench_function("k=10", |b| {
        b.iter(|| filter_stream(black_box(&devices), 10, 1).unwrap())
    });
    g.finish();
}

fn release(c: &mut Criterion) {
    let w = workload();
    let annotated = filter_stream(&group_by_device(w.events.clone()), 10, 1).unwrap();
    let mut cfg = CurrentRunConfig::new(w.global_daily[0].date, w.countries.clone());
    cfg.ingestion_threshold = 10;
    let mut g = c.benchmark_group("release");
    g.throughput(Throughput::Elements(annotated.len() as u64));
    g.sample_size(20);
    g.bench_function("current", |b| {
        b.iter_batched(
            || cfg.clone(),
            |cfg| release_current::release(&cfg, &annotated, &w.global_daily).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, samplers, filter, release);
criterion_main!(benches);
