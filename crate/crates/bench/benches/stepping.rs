use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pnpns_bench::decay;

fn steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("decay step");
    g.sample_size(10);
    for (n, k) in [(16, 1), (16, 2), (32, 2)] {
        let mut sim = decay(n, k);
        g.bench_function(BenchmarkId::new(format!("k{k}"), n), |b| b.iter(|| sim.step().unwrap()));
    }
    g.finish();
}

criterion_group!(benches, steps);
criterion_main!(benches);
