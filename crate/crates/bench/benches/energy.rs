use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shellxy_bench::{scrambled_field, sphere};
use shellxy_core::energy::{xy_energy, xy_gradient};
use shellxy_core::field::realize;
use shellxy_core::vorticity::mu_hat;

fn energy(c: &mut Criterion) {
    let mut g = c.benchmark_group("energy");
    for level in [3u32, 4, 5] {
        let (tri, frames) = sphere(level);
        let f = scrambled_field(tri.num_vertices());
        g.bench_with_input(BenchmarkId::new("xy_energy", level), &level, |b, _| {
            b.iter(|| xy_energy(&tri, &frames, &f, None).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("xy_gradient", level), &level, |b, _| {
            b.iter(|| xy_gradient(&tri, &frames, &f).unwrap())
        });
        let v = realize(&f, &frames).unwrap();
        g.bench_with_input(BenchmarkId::new("mu_hat", level), &level, |b, _| {
            b.iter(|| mu_hat(&tri, &v).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, energy);
criterion_main!(benches);
