use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use facelayout_bench::{descriptor_channel, labeled, manifest};
use facelayout_core::learn::{grid_search, ParamGrid};
use facelayout_core::rng::rng_for;
use facelayout_core::{average_precision, combined, run_cv, train_channel, CvConfig, DescriptorConfig, SvmParams};
use rand::Rng;

fn descriptors(c: &mut Criterion) {
    let m = manifest(100);
    let cfg = DescriptorConfig::default();
    c.bench_function("describe/500 images", |b| {
        b.iter(|| {
            m.records
                .iter()
                .map(|r| combined(black_box(r), &cfg))
                .collect::<Vec<_>>()
        })
    });
    c.bench_function("extract_channel/500 images", |b| {
        b.iter(|| descriptor_channel(black_box(&m)))
    });
}

fn training(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_channel");
    group.sample_size(10);
    for per_class in [20, 50, 100] {
        let data = labeled(&manifest(per_class));
        group.bench_with_input(BenchmarkId::from_parameter(per_class * 5), &data, |b, data| {
            b.iter(|| train_channel("facedesc", data, &SvmParams::new(10.0, 0.05)).unwrap())
        });
    }
    group.finish();

    let data = labeled(&manifest(40));
    let grid = ParamGrid::default();
    let mut group = c.benchmark_group("grid_search");
    group.sample_size(10);
    group.bench_function("default grid/200 images", |b| {
        b.iter(|| grid_search(&data, &grid, &SvmParams::default(), 3).unwrap())
    });
    group.finish();
}

fn ranking(c: &mut Criterion) {
    let mut rng = rng_for(7, &[]);
    let scored: Vec<(f64, bool)> = (0..10_000).map(|_| (rng.gen(), rng.gen_bool(0.1))).collect();
    c.bench_function("average_precision/10k", |b| {
        b.iter(|| average_precision(black_box(&scored)).unwrap())
    });
}

fn cross_validation(c: &mut Criterion) {
    let m = manifest(100);
    let ch = descriptor_channel(&m);
    let mut group = c.benchmark_group("run_cv");
    group.sample_size(10);
    group.bench_function("5 folds/500 images", |b| {
        b.iter(|| run_cv(&m, std::slice::from_ref(&ch), &CvConfig::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, descriptors, training, ranking, cross_validation);
criterion_main!(benches);
