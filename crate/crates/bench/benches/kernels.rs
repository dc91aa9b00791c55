use bottlab_core::clifford::irreducible;
use bottlab_core::linalg::random_skew;
use bottlab_core::liegroup::{expm, logm};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exponential(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    for n in [4, 16, 64] {
        let a = random_skew(n, &mut ChaCha8Rng::seed_from_u64(1));
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| b.iter(|| expm(black_box(a))));
    }
    group.finish();
}

fn logarithm(c: &mut Criterion) {
    let mut group = c.benchmark_group("logm");
    for n in [4, 16, 64] {
        let r = expm(&random_skew(n, &mut ChaCha8Rng::seed_from_u64(2)));
        group.bench_with_input(BenchmarkId::from_parameter(n), &r, |b, r| b.iter(|| logm(black_box(r))));
    }
    group.finish();
}

fn irreducibles(c: &mut Criterion) {
    let mut group = c.benchmark_group("irreducible");
    for k in [3, 8, 12] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| b.iter(|| irreducible(black_box(k))));
    }
    group.finish();
}

criterion_group!(benches, exponential, logarithm, irreducibles);
criterion_main!(benches);
