use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use fdshift_bench::scores_and_residuals;
use fdshift_core::metrics::{auroc_f, rc_curve};
use fdshift_core::oracle::aurc_oracle;
use fdshift_core::FailureLabels;
use std::hint::black_box;

fn aurc(c: &mut Criterion) {
    let mut group = c.benchmark_group("aurc");
    for n in [1_000, 100_000] {
        let (scores, residuals) = scores_and_residuals(n, 0.3, 0.2, 1);
        let labels = FailureLabels::unmasked(residuals.clone());
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("rc_curve", n), &n, |b, _| {
            b.iter(|| rc_curve(black_box(&scores), &labels).unwrap().aurc())
        });
        let mask = vec![1; n];
        group.bench_with_input(BenchmarkId::new("oracle", n), &n, |b, _| {
            b.iter(|| aurc_oracle(black_box(&scores), &residuals, &mask).unwrap())
        });
    }
    group.finish();
}

fn auroc(c: &mut Criterion) {
    let mut group = c.benchmark_group("auroc_f");
    for n in [1_000, 100_000] {
        let (scores, residuals) = scores_and_residuals(n, 0.3, 0.2, 2);
        let labels = FailureLabels::unmasked(residuals);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| auroc_f(black_box(&scores), &labels).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, aurc, auroc);
criterion_main!(benches);
