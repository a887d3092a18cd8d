use criterion::{criterion_group, criterion_main, Criterion};
use shellxy_bench::sphere;
use shellxy_core::field::{hedgehog_ansatz, DefectSpec, HedgehogOptions};
use shellxy_core::minimize::{minimize, SolveOptions};
use shellxy_core::Vec3;

fn hedgehog_relaxation(c: &mut Criterion) {
    let (tri, frames) = sphere(3);
    let defects = [
        DefectSpec {
            center: Vec3::z(),
            charge: 1,
        },
        DefectSpec {
            center: -Vec3::z(),
            charge: 1,
        },
    ];
    let init = hedgehog_ansatz(&tri, &frames, &defects, &HedgehogOptions::default()).unwrap();
    let opts = SolveOptions::default();
    let mut g = c.benchmark_group("minimize");
    g.sample_size(10);
    g.bench_function("hedgehog start, icosphere level 3", |b| {
        b.iter(|| minimize(&tri, &frames, &init, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, hedgehog_relaxation);
criterion_main!(benches);
