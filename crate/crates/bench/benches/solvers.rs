use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use convex_ldp::estimate::simulate_events;
use convex_ldp::{
    build_covariance, dominating_point, is_single, union_combine, ConvexSet, CovarianceModel, DMatrix, DVector,
    Distribution, GaussianModel, LadderRung, RandomStream, ScalingLimit,
};

fn correlated(d: usize, rho: f64) -> CovarianceModel {
    build_covariance(DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })).unwrap()
}

fn polyhedron() -> ConvexSet {
    ConvexSet::polyhedron(
        DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 1.0, 1.0, 1.0, 2.0]),
        DVector::from_vec(vec![4.0, 3.0, 4.0]),
    )
    .unwrap()
}

fn dominating(c: &mut Criterion) {
    let mut g = c.benchmark_group("dominating_point");
    let limit = ScalingLimit::identity(2);
    let cov = correlated(2, 0.5);
    let block = ConvexSet::block(DVector::from_vec(vec![2.0, 2.0])).unwrap();
    let half = ConvexSet::halfspace(DVector::from_vec(vec![1.0, 1.0]), 2.0).unwrap();
    let poly = polyhedron();
    let ellipsoid =
        ConvexSet::ellipsoid(DVector::from_vec(vec![3.0, 3.0]), DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), 1.0)
            .unwrap();
    for (name, set) in [("block", &block), ("halfspace", &half), ("polyhedron", &poly), ("ellipsoid", &ellipsoid)] {
        g.bench_function(name, |b| b.iter(|| dominating_point(black_box(set), &cov, &limit).unwrap()));
    }
    let d = 8;
    let big = ConvexSet::block(DVector::from_element(d, 1.5)).unwrap();
    let cov8 = correlated(d, 0.3);
    let limit8 = ScalingLimit::identity(d);
    g.bench_function("block_d8", |b| b.iter(|| dominating_point(black_box(&big), &cov8, &limit8).unwrap()));
    g.finish();
}

fn projection(c: &mut Criterion) {
    let mut g = c.benchmark_group("projection");
    let poly = polyhedron();
    // points on a circle around the set, most of them infeasible
    let points: Vec<DVector<f64>> = (0..64)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 64.0;
            DVector::from_vec(vec![1.0 + 3.0 * t.cos(), 1.0 + 3.0 * t.sin()])
        })
        .collect();
    g.bench_function("polyhedron_64", |b| {
        b.iter(|| points.iter().map(|x| poly.project(black_box(x)).unwrap()[0]).sum::<f64>())
    });
    let block = ConvexSet::block(DVector::from_element(16, 1.0)).unwrap();
    let x = DVector::from_fn(16, |i, _| i as f64 * 0.1);
    g.bench_function("block_d16", |b| b.iter(|| block.project(black_box(&x)).unwrap()));
    g.finish();
}

fn union(c: &mut Criterion) {
    c.bench_function("union_combine", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 1..=64u64 {
                acc += union_combine(black_box(1e-3 / k as f64), black_box(k * 1000));
            }
            acc
        })
    });
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    let dist = Distribution::from(GaussianModel::centered(correlated(2, 0.5)));
    let set = ConvexSet::block(DVector::from_vec(vec![1.2, 1.2])).unwrap();
    let rung = LadderRung::new(1000, &ScalingLimit::identity(2)).unwrap();
    g.bench_function("events_n1000_t512", |b| {
        b.iter(|| simulate_events(&dist, &set, &rung, 512, RandomStream::from_seed(1)).unwrap())
    });
    let model = GaussianModel::centered(CovarianceModel::identity(2));
    let target = ConvexSet::halfspace(DVector::from_vec(vec![1.0, 1.0]), 6.0).unwrap();
    let shift = DVector::from_vec(vec![3.0, 3.0]);
    g.bench_function("is_single_4096", |b| {
        b.iter(|| is_single(&model, &target, &shift, 4096, RandomStream::from_seed(2)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, dominating, projection, union, simulation);
criterion_main!(benches);
