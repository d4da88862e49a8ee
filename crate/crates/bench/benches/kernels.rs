use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ybl_bench::Fixture;
use ybl_core::certify::{certify_dimension, sweep};
use ybl_core::metric::{curvature_expansion_check, error_term_norms, Bump, ErrorTermConfig, SingleBumpProfile};
use ybl_core::radial::radial_moment;
use ybl_core::sphere::mc_sphere_integral;
use ybl_core::AxisModel;

fn exact(c: &mut Criterion) {
    c.bench_function("certify n=25", |b| b.iter(|| certify_dimension(black_box(25)).unwrap()));
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("certify 25..51", |b| b.iter(|| sweep(25, 51).unwrap()));
    g.finish();
}

fn integrals(c: &mut Criterion) {
    c.bench_function("radial moment", |b| b.iter(|| radial_moment(black_box(23.0), black_box(30.0)).unwrap()));
    let f = Fixture::new(25, 1).unwrap();
    let model = AxisModel::new(25, f.tau, &f.w.contractions()).unwrap();
    c.bench_function("axis energy closed form", |b| b.iter(|| model.f_axis(black_box(1.1))));
    c.bench_function("centre hessian", |b| b.iter(|| model.hessian_xixi(black_box(1.0))));
    let mut g = c.benchmark_group("monte carlo");
    g.sample_size(10);
    g.bench_function("sphere integral 1e5", |b| {
        b.iter(|| mc_sphere_integral(|u| u[0] * u[0] * u[1] * u[1], 25, 100_000, 1).unwrap())
    });
    g.finish();
}

fn metric(c: &mut Criterion) {
    let f = Fixture::new(25, 7).unwrap();
    let x = f.points(1, 2).remove(0);
    c.bench_function("H(x) factored n=25", |b| b.iter(|| f.w.h(black_box(&x))));
    c.bench_function("H(x) dense n=25", |b| b.iter(|| f.w.h_dense(black_box(&x))));
    let bump = Bump::centered(&f.w, SingleBumpProfile::new(f.tau, f.params));
    let mut g = c.benchmark_group("curvature");
    g.sample_size(10);
    g.bench_function("expansion point n=25", |b| b.iter(|| curvature_expansion_check(&bump, &x, 2e-5).unwrap()));
    let cfg = ErrorTermConfig::standard(25, f.params).unwrap();
    g.bench_function("error term 1e4 directions", |b| {
        b.iter(|| error_term_norms(&f.w, f.tau, std::slice::from_ref(&cfg), 10_000, 1).unwrap())
    });
    g.finish();
}

criterion_group!(benches, exact, integrals, metric);
criterion_main!(benches);
