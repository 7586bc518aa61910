use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qgibbs::gibbs::{mcmc_sample, quadrature_kernel};
use qgibbs::spin::Tempered;
use qgibbs::{
    GeometricGraph, KernelSpec, ModelParams, Observable, PairPotential, ProcessSpec, QuadratureGrid, SamplerConfig,
    SinglePotential, SiteSet, SpinField, Window,
};

fn model() -> ModelParams {
    ModelParams {
        scale: 1.0,
        pair: PairPotential::ferromagnetic(0.2, 1.0, 1),
        single: SinglePotential::power(1.0, 4.0, 1),
        tempered: Tempered { alpha: 0.5, p: 3.0, m: 6 },
    }
}

fn graph_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph_build");
    for side in [20.0, 60.0] {
        let window = Window::cube(2, 0.0, side).unwrap();
        let config = ProcessSpec::poisson(1.0).sample(&window, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(config.len()), &config, |b, config| {
            b.iter(|| GeometricGraph::build(config, 1.0).unwrap())
        });
    }
    group.finish();
}

fn metropolis_sweeps(c: &mut Criterion) {
    let window = Window::cube(2, 0.0, 10.0).unwrap();
    let config = ProcessSpec::poisson(1.0).sample(&window, 2).unwrap();
    let graph = GeometricGraph::build(&config, 1.0).unwrap();
    let m = model();
    let n = config.len();
    let spec = KernelSpec::new(&graph, SiteSet::all(n), SpinField::zeros(n, 1), &m).unwrap();
    let cfg = SamplerConfig {
        burn_in: 100,
        sweeps: 1000,
        seed: 3,
        ..SamplerConfig::default()
    };
    let obs = [Observable::power(0, 0, 2, 1)];
    c.bench_function("metropolis_1000_sweeps", |b| b.iter(|| mcmc_sample(&spec, &cfg, &obs).unwrap()));
}

fn quadrature(c: &mut Criterion) {
    let window = Window::cube(2, -5.0, 5.0).unwrap();
    let config = qgibbs::Configuration::from_points(window, &[vec![-1.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let graph = GeometricGraph::build(&config, 1.0).unwrap();
    let m = model();
    let spec = KernelSpec::new(&graph, SiteSet::all(3), SpinField::zeros(3, 1), &m).unwrap();
    let obs = [Observable::power(1, 0, 2, 1)];
    let mut group = c.benchmark_group("quadrature_three_sites");
    group.sample_size(10);
    for nodes in [51, 101] {
        let grid = QuadratureGrid::new(3.0, nodes).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &grid, |b, grid| {
            b.iter(|| quadrature_kernel(&spec, grid).unwrap().expectations(&obs))
        });
    }
    group.finish();
}

criterion_group!(benches, graph_build, metropolis_sweeps, quadrature);
criterion_main!(benches);
