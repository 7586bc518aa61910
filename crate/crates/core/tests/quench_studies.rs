mod common;

use common::model;
use qgibbs::gibbs::SamplerConfig;
use qgibbs::graph::{functional_b, WeightParams};
use qgibbs::quench::{
    annealed_sample, build_section, cesaro_means, cesaro_study, moment_study, AnnealedConfig, CesaroConfig,
    DesignPoint, LocalKind, MomentStudyConfig,
};
use qgibbs::spin::tempered_norm_pow;
use qgibbs::{BoundarySection, Bounds, Configuration, GeometricGraph, ProcessSpec, SiteSet, VolumeSequence, Window};
use statrs::function::gamma::gamma;

fn poisson(side: f64, seed: u64) -> Configuration {
    let w = Window::cube(2, 0.0, side).unwrap();
    ProcessSpec::poisson(1.0).sample(&w, seed).unwrap()
}

fn quick(seed: u64, sweeps: usize) -> SamplerConfig {
    SamplerConfig {
        burn_in: 1_000,
        sweeps,
        seed,
        ..SamplerConfig::default()
    }
}

/// `∫|u|^3 e^{-u^4} / ∫ e^{-u^4}`.
fn mu3() -> f64 {
    1.0 / gamma(0.25)
}

#[test]
fn section_rules() {
    let config = poisson(8.0, 1);
    let w = WeightParams::new(0.7, config.window()).unwrap();
    let zero = build_section(&BoundarySection::Zero, &config, 2).unwrap();
    assert_eq!(tempered_norm_pow(&config, &zero, &w, 3.0), 0.0);

    let c = 1.7;
    let constant = build_section(&BoundarySection::Constant { c }, &config, 2).unwrap();
    let lhs = tempered_norm_pow(&config, &constant, &w, 3.0);
    let rhs = c.powi(3) * functional_b(&config, &w);
    assert!((lhs - rhs).abs() <= 1e-12 * rhs);

    let radial = BoundarySection::Radial { c, beta: 0.1 };
    let xi = build_section(&radial, &config, 1).unwrap();
    for i in 0..config.len() {
        assert!(xi.get(i)[0] <= c * (0.1 * config.radius(i)).exp());
    }
    let shifted = w.with_alpha(0.7 - 3.0 * 0.1).unwrap();
    let bound = c.powi(3) * functional_b(&config, &shifted);
    assert!(tempered_norm_pow(&config, &xi, &w, 3.0) <= bound * (1.0 + 1e-12));
    assert!(BoundarySection::Constant { c: -1.0 }.validate().is_err());
}

#[test]
fn geometric_volumes_nest() {
    let window = Window::cube(2, 0.0, 12.0).unwrap();
    let v = VolumeSequence::geometric(&window, 8, 1.3).unwrap();
    assert_eq!(v.len(), 8);
    assert_eq!(v.boxes.last().unwrap(), &window.bounds);
    for pair in v.boxes.windows(2) {
        assert!(pair[0].is_within(&pair[1]) && pair[0] != pair[1]);
    }
    let ratio = v.boxes[7].side(0) / v.boxes[6].side(0);
    assert!((ratio - 1.3).abs() < 1e-12);
    assert!(VolumeSequence::geometric(&window, 3, 1.0).is_err());
    let bad = vec![window.bounds.clone(), Bounds::cube(2, 1.0, 2.0).unwrap()];
    assert!(VolumeSequence::new(&window, bad).is_err());
}

#[test]
fn free_moments_follow_single_site_law() {
    let config = poisson(8.0, 3);
    let m = model(0.0, 1.0, 4.0);
    let graph = GeometricGraph::build(&config, 1.0).unwrap();
    let volumes = VolumeSequence::geometric(config.window(), 4, 1.3).unwrap();
    let cfg = MomentStudyConfig {
        sampler: quick(4, 40_000),
        ..MomentStudyConfig::default()
    };
    let report = moment_study(&graph, &volumes, &m, &cfg).unwrap();
    let w = m.weights(&config).unwrap();
    for (r, b) in report.series.iter().zip(&volumes.boxes) {
        let inside = SiteSet::in_bounds(&config, b);
        let weight: f64 = inside.indices().iter().map(|&i| w.weight(config.point(i))).sum();
        let expected = mu3() * weight;
        assert!(
            (r.moment - expected).abs() < 3.0 * r.std_error,
            "volume {}: {} ± {} vs {expected}",
            r.volume,
            r.moment,
            r.std_error
        );
        assert_eq!(r.boundary_norm, 0.0);
    }
    assert_eq!(report.constants[2], 0.0);
    assert!(report.all_finite);
    assert!(report.min_hill_index.unwrap() > 1.0);
}

#[test]
fn boundary_scale_raises_moments() {
    let config = poisson(6.0, 5);
    let m = model(0.1, 1.0, 4.0);
    let graph = GeometricGraph::build(&config, 1.0).unwrap();
    let volumes = VolumeSequence::geometric(config.window(), 3, 1.5).unwrap();
    let cfg = MomentStudyConfig {
        section: BoundarySection::Constant { c: 1.0 },
        sampler: quick(6, 10_000),
        extra_design: vec![
            DesignPoint { volume: 0, xi_scale: 2.0 },
            DesignPoint { volume: 0, xi_scale: 3.0 },
        ],
        ..MomentStudyConfig::default()
    };
    let report = moment_study(&graph, &volumes, &m, &cfg).unwrap();
    let at_zero: Vec<f64> = report.design.iter().filter(|r| r.volume == 0).map(|r| r.moment).collect();
    assert_eq!(at_zero.len(), 3);
    assert!(at_zero[0] < at_zero[1] && at_zero[1] < at_zero[2]);
    assert!(report.constants.iter().all(|c| *c >= 0.0));
    let lambda_cap = 0.1 * m.single.stability().0;
    assert!(report.lambda <= lambda_cap);
    assert!(report.design.iter().all(|r| r.exp_moment >= 1.0));
}

#[test]
fn moment_study_rejects_invalid_models() {
    let config = poisson(4.0, 1);
    let graph = GeometricGraph::build(&config, 1.0).unwrap();
    let volumes = VolumeSequence::geometric(config.window(), 2, 1.5).unwrap();
    let m = model(0.1, 1.0, 2.0);
    assert!(moment_study(&graph, &volumes, &m, &MomentStudyConfig::default()).is_err());
}

fn nearest_to_origin(config: &Configuration) -> usize {
    (0..config.len())
        .min_by(|&a, &b| config.radius(a).total_cmp(&config.radius(b)))
        .unwrap()
}

#[test]
fn cesaro_of_constant_is_constant() {
    let config = poisson(6.0, 8);
    let m = model(0.2, 1.0, 4.0);
    let graph = GeometricGraph::build(&config, 1.0).unwrap();
    let volumes = VolumeSequence::geometric(config.window(), 4, 1.3).unwrap();
    let site = nearest_to_origin(&config);
    let cfg = CesaroConfig {
        sampler: quick(9, 2_000),
        observables: vec![LocalKind::Constant { value: 1.0 }, LocalKind::Tanh { site, comp: 0 }],
        ..CesaroConfig::default()
    };
    let r = cesaro_study(&graph, &volumes, &m, &cfg).unwrap();
    assert!(r.g[0].iter().all(|g| *g == 1.0));
    assert!(r.running[0].iter().all(|g| *g == 1.0));
    assert!(r.stable[0]);
    for (g, running) in r.g.iter().zip(&r.running) {
        for n in 1..=g.len() {
            assert_eq!(running[n - 1], g[..n].iter().sum::<f64>() / n as f64);
        }
    }
    assert_eq!(cesaro_means(&[2.0, 4.0, 0.0]), vec![2.0, 3.0, 2.0]);
}

#[test]
fn cesaro_rejects_observables_outside_the_smallest_volume() {
    let config = poisson(6.0, 8);
    let m = model(0.2, 1.0, 4.0);
    let graph = GeometricGraph::build(&config, 1.0).unwrap();
    let volumes = VolumeSequence::geometric(config.window(), 4, 1.3).unwrap();
    let first = SiteSet::in_bounds(&config, &volumes.boxes[0]);
    let outside = (0..config.len()).find(|&i| !first.contains(i)).unwrap();
    let cfg = CesaroConfig {
        sampler: quick(9, 100),
        observables: vec![LocalKind::Tanh { site: outside, comp: 0 }],
        ..CesaroConfig::default()
    };
    assert!(cesaro_study(&graph, &volumes, &m, &cfg).is_err());
}

#[test]
fn free_cesaro_is_flat() {
    let config = poisson(6.0, 10);
    let m = model(0.0, 1.0, 4.0);
    let graph = GeometricGraph::build(&config, 1.0).unwrap();
    let volumes = VolumeSequence::geometric(config.window(), 6, 1.3).unwrap();
    let site = nearest_to_origin(&config);
    let cfg = CesaroConfig {
        sampler: quick(11, 20_000),
        observables: vec![LocalKind::Cos { site, comp: 0 }],
        ..CesaroConfig::default()
    };
    let r = cesaro_study(&graph, &volumes, &m, &cfg).unwrap();
    assert!(r.stable[0], "{:?} vs {:?}", r.tail_fluctuation, r.combined_std_error);
}

#[test]
fn sparse_annealed_draws_are_mostly_empty() {
    let window = Window::cube(2, 0.0, 3.0).unwrap();
    let m = model(0.2, 1.0, 4.0);
    let cfg = AnnealedConfig {
        sampler: quick(1, 200),
        num_disorder: 200,
        seed: 5,
        ..AnnealedConfig::default()
    };
    let (report, draws) = annealed_sample(&ProcessSpec::poisson(0.01), &window, &window.bounds, &m, &cfg).unwrap();
    assert!(report.empty_fraction > 0.8);
    assert!(report.phi.q50 == 0.0);
    assert_eq!(draws.len(), 200);
}

#[test]
fn free_annealed_decomposes() {
    let window = Window::cube(2, 0.0, 5.0).unwrap();
    let volume = Bounds::cube(2, 1.0, 4.0).unwrap();
    let m = model(0.0, 1.0, 4.0);
    let cfg = AnnealedConfig {
        sampler: quick(2, 4_000),
        num_disorder: 60,
        seed: 7,
        ..AnnealedConfig::default()
    };
    let (report, draws) = annealed_sample(&ProcessSpec::poisson(1.0), &window, &volume, &m, &cfg).unwrap();
    for d in &draws {
        let w = m.weights(&d.configuration).unwrap();
        let inside = SiteSet::in_bounds(&d.configuration, &volume);
        let expected: f64 = mu3() * inside.indices().iter().map(|&i| w.weight(d.configuration.point(i))).sum::<f64>();
        let tol = 4.0 * d.norm_std_error + 1e-12;
        assert!((d.norm_mean - expected).abs() <= tol, "{} vs {expected}", d.norm_mean);
    }
    assert!(report.phi.mean.is_finite());
    assert!((report.phi_decomposed - (report.b_alpha.mean + report.norm.mean)).abs() < 1e-9);
}

#[test]
fn quenched_average_matches_annealed() {
    let window = Window::cube(2, 0.0, 4.0).unwrap();
    let m = model(0.1, 1.0, 4.0);
    let process = ProcessSpec::poisson(1.0);
    let annealed_cfg = AnnealedConfig {
        sampler: quick(3, 3_000),
        num_disorder: 40,
        seed: 13,
        ..AnnealedConfig::default()
    };
    let (report, draws) = annealed_sample(&process, &window, &window.bounds, &m, &annealed_cfg).unwrap();
    let volumes = VolumeSequence::new(&window, vec![window.bounds.clone()]).unwrap();
    let quenched: Vec<f64> = draws
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let graph = GeometricGraph::build(&d.configuration, 1.0).unwrap();
            let cfg = MomentStudyConfig {
                sampler: quick(1_000 + k as u64, 3_000),
                ..MomentStudyConfig::default()
            };
            moment_study(&graph, &volumes, &m, &cfg).unwrap().series[0].moment
        })
        .collect();
    let qmean = quenched.iter().sum::<f64>() / quenched.len() as f64;
    let qvar = quenched.iter().map(|v| (v - qmean).powi(2)).sum::<f64>() / (quenched.len() - 1) as f64;
    let se = (qvar / quenched.len() as f64 + report.norm.std_error.powi(2)).sqrt();
    assert!((qmean - report.norm.mean).abs() < 3.0 * se, "{qmean} vs {}", report.norm.mean);
}

#[test]
fn radial_section_must_be_tempered() {
    let m = model(0.1, 1.0, 4.0);
    let rule = BoundarySection::Radial { c: 1.0, beta: 0.5 };
    let err = rule.check_tempered(&m).unwrap_err().to_string();
    assert!(err.contains("alpha > p*beta violated"), "{err}");
    assert!(BoundarySection::Radial { c: 1.0, beta: 0.3 }.check_tempered(&m).is_ok());
}
