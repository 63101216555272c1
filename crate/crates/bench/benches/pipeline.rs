use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use finsler_core::axioms::{run_suite, SuiteOptions};
use finsler_core::dsl::parse;
use finsler_core::jet::JetContext;
use finsler_core::{
    BasePoint, BuiltinFamily, ConnectionKind, FinslerConnection, PointGeometry, SampleSet, SamplingPolicy, SuiteId,
};

fn jets(c: &mut Criterion) {
    let e = parse("sqrt(1 + (x1*y2 - x2*y1)^2)/(1 + y1^2 + y2^2)", 2).unwrap();
    let mut group = c.benchmark_group("jet_eval");
    for order in [2, 4, 6] {
        let ctx = JetContext::new(vec![0.3, -0.2, 1.0, 0.5], order).unwrap();
        let vars = ctx.seed_all();
        group.bench_with_input(BenchmarkId::from_parameter(order), &vars, |b, vars| {
            b.iter(|| e.evaluate(black_box(vars)).unwrap())
        });
    }
    group.finish();
}

fn geometry(c: &mut Criterion) {
    let spec = BuiltinFamily::randers_rotational(2, 0.3).build().unwrap();
    let p = BasePoint::new(vec![0.3, -0.2], vec![1.0, 0.5]).unwrap();
    c.bench_function("point_geometry_tensors", |b| {
        b.iter(|| {
            let geo = PointGeometry::new(&spec, black_box(&p), 6).unwrap();
            geo.landsberg().unwrap().len() + geo.nonlinear_curvature().unwrap().len()
        })
    });
    let conn = FinslerConnection::catalogue(ConnectionKind::Cartan);
    c.bench_function("connection_curvature", |b| {
        let geo = PointGeometry::new(&spec, &p, 6).unwrap();
        b.iter(|| conn.at(&geo).unwrap().curvature().unwrap().len())
    });
}

fn suites(c: &mut Criterion) {
    let spec = BuiltinFamily::randers_rotational(2, 0.3).build().unwrap();
    let samples = SampleSet::generate(&spec, &SamplingPolicy::default().with_count(50).with_seed(1)).unwrap();
    let conn = FinslerConnection::catalogue(ConnectionKind::Chern);
    let opts = SuiteOptions::default();
    let mut group = c.benchmark_group("suite_50_points");
    group.sample_size(10);
    for suite in [
        SuiteId::Xkj,
        SuiteId::Chern,
        SuiteId::Identities,
        SuiteId::UniquenessChern,
    ] {
        group.bench_function(suite.name(), |b| {
            b.iter(|| run_suite(suite, &conn, &spec, &samples, &opts).unwrap().pass)
        });
    }
    group.finish();
}

criterion_group!(benches, jets, geometry, suites);
criterion_main!(benches);
