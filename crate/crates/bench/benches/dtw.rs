use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use roadclust_bench::observed;
use roadclust_core::{Dtw, LocalDistance};

fn distance(c: &mut Criterion) {
    let mut group = c.benchmark_group("dtw_distance");
    // 60-minute and 15-minute weekly grids.
    for minutes in [60, 15] {
        let series = observed(1, minutes, 1);
        let (a, b) = (series[0].values(), series[1].values());
        for (label, dtw) in [
            ("full", Dtw::new(LocalDistance::Absolute)),
            ("band_24", Dtw::new(LocalDistance::Absolute).with_window(24)),
        ] {
            group.bench_with_input(BenchmarkId::new(label, a.len()), &(a, b), |bench, (a, b)| {
                bench.iter(|| dtw.distance(black_box(a), black_box(b)).unwrap())
            });
        }
    }
    group.finish();
}

fn alignment(c: &mut Criterion) {
    let series = observed(1, 60, 2);
    let dtw = Dtw::new(LocalDistance::Absolute);
    c.bench_function("dtw_alignment_168", |bench| {
        bench.iter(|| dtw.alignment(black_box(series[0].values()), black_box(series[2].values())).unwrap())
    });
}

fn pairwise(c: &mut Criterion) {
    let series = observed(10, 60, 3);
    let values: Vec<&[f64]> = series.iter().map(|s| s.values()).collect();
    let dtw = Dtw::new(LocalDistance::Absolute);
    c.bench_function("dtw_pairwise_30x168", |bench| bench.iter(|| dtw.pairwise(black_box(&values)).unwrap()));
}

criterion_group!(benches, distance, alignment, pairwise);
criterion_main!(benches);
