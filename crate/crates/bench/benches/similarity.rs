use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use densim::density::{self, DensityConfig, KernelShape, KernelSpec};
use densim::{sampler, similarity, RankMatrix};

fn similarity(c: &mut Criterion) {
    let p = densim_bench::corpus(200).expect("fixture");
    let bw = densim_bench::bandwidth(&p).expect("bandwidth");
    let radius = sampler::sampling_radius(&p.embedding.vector_norms(), 0.95).expect("radius");
    let samples = sampler::sample_ball(1000, p.embedding.dim(), radius, 0).expect("samples");
    let cfg = DensityConfig {
        bandwidth: &bw,
        kernel: KernelSpec::new(KernelShape::Gaussian, p.embedding.dim()).expect("kernel"),
        normalize: false,
    };
    let dens = density::density_matrix(&p.queries, &p.embedding, &samples, &cfg).expect("density");

    let mut group = c.benchmark_group("similarity");
    group.bench_function(BenchmarkId::new("cosine", dens.n_docs()), |b| {
        b.iter(|| similarity::cosine_similarity_rows(&dens, &dens).expect("cosine"))
    });
    group.bench_function(BenchmarkId::new("jensen_shannon", dens.n_docs()), |b| {
        b.iter(|| similarity::jensen_shannon_similarity(&dens, &dens).expect("js"))
    });
    let sim = similarity::cosine_similarity_rows(&dens, &dens).expect("cosine");
    group.bench_function(BenchmarkId::new("rank", dens.n_docs()), |b| {
        b.iter(|| RankMatrix::from_similarity(&sim, true))
    });
    group.finish();
}

criterion_group!(benches, similarity);
criterion_main!(benches);
