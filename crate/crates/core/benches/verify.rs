use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use ehresmann::geometry::At;
use ehresmann::par::{map_points, map_points_seq};
use ehresmann::scenarios::{builtin, Settings};

/// Every frame pair of `∇` evaluated at every sample point, the inner loop
/// of a verification run.
fn bench_nabla(c: &mut Criterion) {
    let mut group = c.benchmark_group("nabla-all-pairs");
    group.sample_size(10);
    for name in ["hopf", "affine-tangent"] {
        let s = builtin(name).unwrap().build(Settings::default()).unwrap();
        let frame = s.frame();
        let depth = s.settings().depth;
        let work = |_: usize, p: &Vec<f64>| {
            let at = At::new(p, depth);
            let mut acc = 0.0;
            for x in &frame {
                for y in &frame {
                    let v = s.nabla().nabla(x, y).unwrap().value(&at).unwrap();
                    acc += v.iter().map(|c| c.abs()).sum::<f64>();
                }
            }
            acc
        };
        let points = &s.sampling().points;
        group.bench_function(format!("{name}/map_points"), |b| {
            b.iter(|| black_box(map_points(points, work)))
        });
        group.bench_function(format!("{name}/map_points_seq"), |b| {
            b.iter(|| black_box(map_points_seq(points, work)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_nabla);
criterion_main!(benches);
