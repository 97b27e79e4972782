use criterion::{black_box, criterion_group, criterion_main, Criterion};

use bondlimit::functionals::trial::HydrogenicMixture;
use bondlimit::gb::{gb_solve_n2, GbSearch};
use bondlimit::mmot::{comotion_cost_n2, mmot_exact, radial_line_surrogate};
use bondlimit::optim::SearchConfig;
use bondlimit::partial::partial_cost;
use bondlimit::DiscreteMeasure;

fn lattice(k: usize) -> DiscreteMeasure {
    let points: Vec<[f64; 3]> = (0..k)
        .map(|i| {
            let t = i as f64 * 2.399;
            [t.cos() * (1.0 + 0.1 * i as f64), t.sin(), 0.05 * i as f64]
        })
        .collect();
    DiscreteMeasure::new(points, vec![1.0 / k as f64; k]).unwrap()
}

fn transport(c: &mut Criterion) {
    let small = lattice(8);
    let medium = lattice(30);
    c.bench_function("mmot_exact n2 k8", |b| b.iter(|| mmot_exact(black_box(&small), 2).unwrap()));
    c.bench_function("mmot_exact n2 k30", |b| b.iter(|| mmot_exact(black_box(&medium), 2).unwrap()));
    c.bench_function("mmot_exact n3 k8", |b| b.iter(|| mmot_exact(black_box(&small), 3).unwrap()));
    c.bench_function("partial_cost n2 k8", |b| b.iter(|| partial_cost(black_box(&small), 0.6, 2).unwrap()));
}

fn radial(c: &mut Criterion) {
    let rho = HydrogenicMixture::single(1.0, 1.0).unwrap().to_radial(40.0, 4000, [0.0; 3]).unwrap();
    c.bench_function("comotion hydrogen", |b| b.iter(|| comotion_cost_n2(black_box(&rho)).unwrap()));
    let line = radial_line_surrogate(&rho, 30).unwrap();
    c.bench_function("line surrogate lp 30", |b| b.iter(|| mmot_exact(black_box(&line), 2).unwrap()));
}

fn gb(c: &mut Criterion) {
    let search = GbSearch {
        components: 1,
        search: SearchConfig { restarts: 2, max_iters: 200, ..SearchConfig::default() },
        ..GbSearch::default()
    };
    let mut group = c.benchmark_group("gb");
    group.sample_size(10);
    group.bench_function("gb_solve_n2 alpha 0.8", |b| b.iter(|| gb_solve_n2(1.0, 0.5, black_box(0.8), &search).unwrap()));
    group.finish();
}

criterion_group!(benches, transport, radial, gb);
criterion_main!(benches);
