use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use densim::similarity::{self, RwmdVariant};

fn rwmd(c: &mut Criterion) {
    let mut group = c.benchmark_group("rwmd_matrix");
    group.sample_size(10);
    for n in [50, 100] {
        let p = densim_bench::corpus(n).expect("fixture");
        group.bench_with_input(BenchmarkId::new("symmetric", n), &p, |b, p| {
            b.iter(|| {
                similarity::rwmd_matrix(&p.queries, &p.queries, &p.embedding, RwmdVariant::Symmetric, None)
                    .expect("rwmd")
            })
        });
    }
    group.finish();
}

criterion_group!(benches, rwmd);
criterion_main!(benches);
