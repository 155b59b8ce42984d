use criterion::{criterion_group, criterion_main, Criterion};
use domeseg::eval::step_size_sweep;
use domeseg::smoothing::diffuse;
use domeseg::{segment, PipelineConfig};
use domeseg_bench::standard_scene;
use std::hint::black_box;

fn pipeline(c: &mut Criterion) {
    let raw = standard_scene();
    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("diffuse/256", |b| {
        b.iter(|| diffuse(black_box(&raw), &cfg.diffusion).unwrap())
    });
    group.bench_function("segment/256", |b| {
        b.iter(|| segment(black_box(&raw), &cfg).unwrap())
    });
    let t_s = diffuse(&raw, &cfg.diffusion).unwrap();
    group.bench_function("sweep/256", |b| {
        b.iter(|| step_size_sweep(black_box(&t_s), &cfg.extraction, &[0.05, 0.1, 0.15, 0.2]).unwrap())
    });
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
