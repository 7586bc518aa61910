//! Runs the study named by a manifest and writes its artifacts.
//!
//! Seeds follow `master -> study -> (configuration | chains | disorder)`:
//! the study seed is `derive_seed_str(master, study name)`, the quenched
//! configuration uses child 0, samplers use child 1 and process draws use
//! child 2. Sampler seeds given in the manifest are replaced by the derived
//! ones and echoed in the resolved manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gibbs::{
    detailed_balance_check, dlr_consistency_check, mcmc_sample, quadrature_kernel, KernelSpec, Observable,
    QuadratureGrid,
};
use crate::graph::{graph_functionals, integrability_study, GeometricGraph, WeightParams};
use crate::manifest::{Manifest, StudyKind};
use crate::marked::{save_marked, MarkedSet};
use crate::numfmt::format_f64;
use crate::point_process::estimate_correlation;
use crate::quench::{
    annealed_sample, build_section, cesaro_study, LocalKind, moment_study, AnnealedConfig, CesaroConfig, MomentStudyConfig,
    VolumeSequence,
};
use crate::rng::{derive_seed, derive_seed_str};
use crate::spin::{ModelParams, SiteSet};
use crate::window::Configuration;

const CONFIGURATION_SEED: u64 = 0;
const SAMPLER_SEED: u64 = 1;
const PROCESS_SEED: u64 = 2;

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub study: StudyKind,
    pub files: Vec<PathBuf>,
    pub report: serde_json::Value,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

/// Fills in derived defaults so the echo names everything the run used.
pub fn resolve(manifest: &Manifest) -> Result<Manifest> {
    let mut m = manifest.clone();
    let study_seed = derive_seed_str(m.seed, m.study.as_str());
    m.sampler.seed = derive_seed(study_seed, SAMPLER_SEED);
    if let Some(model) = &m.model {
        if m.study == StudyKind::Moments && m.moments.lambda.is_none() {
            m.moments.lambda = Some(0.1 * model.single.stability().0);
        }
    }
    m.window()?;
    Ok(m)
}

fn quenched_configuration(m: &Manifest, study_seed: u64) -> Result<Configuration> {
    let window = m.window()?;
    if let Some(points) = &m.configuration.points {
        return Configuration::from_points(window, points).map_err(|e| e.context("configuration.points"));
    }
    if let Some(path) = &m.configuration.path {
        let file = fs::File::open(path)?;
        let config = Configuration::read_text(std::io::BufReader::new(file))
            .map_err(|e| e.context(format!("configuration file {}", path.display())))?;
        if config.window() != &window {
            return Err(Error::Manifest {
                field: "configuration.path".into(),
                message: "configuration window differs from [window]".into(),
            });
        }
        return Ok(config);
    }
    m.process.sample(&window, derive_seed(study_seed, CONFIGURATION_SEED))
}

fn checked_model(m: &Manifest) -> Result<&ModelParams> {
    let model = m.model()?;
    if !m.sampler.bypass_validation {
        model.require_valid()?;
    }
    Ok(model)
}

fn to_json<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(value)?)
}

fn num(x: f64, m: &Manifest) -> String {
    format_f64(x, m.number_format)
}

/// Executes the study and writes `resolved.toml`, `report.json` and the
/// study's tables into `out_dir`.
pub fn run(manifest: &Manifest, out_dir: &Path) -> Result<StudyOutcome> {
    let m = resolve(manifest)?;
    let study_seed = derive_seed_str(m.seed, m.study.as_str());
    if let Some(model) = &m.model {
        if !m.sampler.bypass_validation {
            model.require_valid()?;
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut out = Artifacts {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    out.write("resolved.toml", m.to_toml().as_bytes())?;
    let context = |e: Error| e.context(format!("study {}", m.study.as_str()));
    let result = match m.study {
        StudyKind::GraphStats => graph_stats(&m, study_seed, &mut out),
        StudyKind::Correlation => correlation(&m, study_seed, &mut out),
        StudyKind::KernelCheck => kernel_check(&m, study_seed, &mut out),
        StudyKind::Dlr => dlr(&m, study_seed, &mut out),
        StudyKind::Moments => moments(&m, study_seed, &mut out),
        StudyKind::Annealed => annealed(&m, study_seed, &mut out),
        StudyKind::Cesaro => cesaro(&m, study_seed, &mut out),
    }
    .map_err(context)?;
    let report = json!({
        "study": m.study.as_str(),
        "master_seed": m.seed,
        "study_seed": study_seed,
        "validity": m.model.as_ref().map(|model| model.validate()),
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    out.write("report.json", text.as_bytes())?;
    Ok(StudyOutcome {
        study: m.study,
        files: out.files,
        report,
    })
}

fn write_configuration(m: &Manifest, config: &Configuration, out: &mut Artifacts) -> Result<()> {
    let mut buf = Vec::new();
    config.write_text(&mut buf, m.number_format)?;
    out.write("configuration.txt", &buf)
}

fn graph_stats(m: &Manifest, seed: u64, out: &mut Artifacts) -> Result<serde_json::Value> {
    let block = &m.graph_stats;
    let config = quenched_configuration(m, seed)?;
    let graph = GeometricGraph::build(&config, block.radius)?;
    let w = WeightParams::new(block.alpha, config.window())?;
    let functionals = graph_functionals(&graph, &w, block.r, block.m)?;
    let integrability = if block.samples > 0 {
        Some(integrability_study(
            &m.process,
            config.window(),
            block.radius,
            &w,
            block.r,
            block.m,
            block.samples,
            derive_seed(seed, PROCESS_SEED),
        )?)
    } else {
        None
    };
    write_configuration(m, &config, out)?;
    out.write("degrees.tsv", graph.degree_table_text().as_bytes())?;
    out.write("edges.tsv", graph.edge_list_text().as_bytes())?;
    let mean_degree = if graph.is_empty() {
        0.0
    } else {
        2.0 * graph.edge_count() as f64 / graph.len() as f64
    };
    Ok(json!({
        "points": graph.len(),
        "edges": graph.edge_count(),
        "mean_degree": mean_degree,
        "degree_histogram": graph.degree_histogram(),
        "functionals": functionals,
        "integrability": integrability,
    }))
}

fn correlation(m: &Manifest, seed: u64, out: &mut Artifacts) -> Result<serde_json::Value> {
    use rayon::prelude::*;
    let block = &m.correlation;
    if block.samples == 0 {
        return Err(Error::Manifest {
            field: "correlation.samples".into(),
            message: "must be positive".into(),
        });
    }
    let window = m.window()?;
    let base = derive_seed(seed, PROCESS_SEED);
    let samples: Vec<Configuration> = (0..block.samples)
        .into_par_iter()
        .map(|k| m.process.sample(&window, derive_seed(base, k as u64)))
        .collect::<Result<_>>()?;
    let k1 = estimate_correlation(&samples, 1, block.cell_size)?;
    let k2 = estimate_correlation(&samples, 2, block.cell_size)?;
    let mut table = String::from("order\tcells\tvalue\tstd_error\n");
    for est in [&k1, &k2] {
        for e in &est.entries {
            let cells: Vec<String> = e.cells.iter().map(usize::to_string).collect();
            writeln!(
                table,
                "{}\t{}\t{}\t{}",
                est.order,
                cells.join(","),
                num(e.value, m),
                num(e.std_error, m)
            )
            .unwrap();
        }
    }
    out.write("correlation.tsv", table.as_bytes())?;
    Ok(json!({ "k1": k1, "k2": k2, "intensity": m.process.intensity }))
}

fn site_observables(sites: &[usize], powers: &[i32]) -> Vec<Observable> {
    let mut obs = Vec::new();
    for &s in sites {
        for &p in powers {
            obs.push(Observable::power(s, 0, p, 1));
        }
    }
    for (i, &a) in sites.iter().enumerate() {
        for &b in &sites[i + 1..] {
            obs.push(Observable::product(a, b, 1));
        }
    }
    obs
}

fn kernel_check(m: &Manifest, seed: u64, out: &mut Artifacts) -> Result<serde_json::Value> {
    let model = checked_model(m)?;
    let block = &m.kernel_check;
    let config = quenched_configuration(m, seed)?;
    let graph = GeometricGraph::build(&config, model.pair.range)?;
    let xi = build_section(&m.section, &config, model.spin_dim())?;
    let eta = SiteSet::new(config.len(), block.sites.clone())?;
    let spec = KernelSpec::new(&graph, eta, xi, model)?;
    let observables = site_observables(spec.eta.indices(), &[1, 2, 4]);
    let samples = mcmc_sample(&spec, &m.sampler, &observables)?;
    let grid = QuadratureGrid::new(block.u_max, block.nodes)?;
    let exact = quadrature_kernel(&spec, &grid)?.expectations(&observables);
    let summary = samples.summary();
    let z: Vec<f64> = summary
        .moments
        .iter()
        .zip(&summary.standard_errors)
        .zip(&exact)
        .map(|((mc, se), ex)| (mc - ex) / se)
        .collect();
    let balance = detailed_balance_check(&model.single, model.scale, &grid, block.proposal_sd)?;
    out.write("trace.tsv", samples.trace_text().as_bytes())?;
    Ok(json!({
        "kernel": summary,
        "quadrature": exact,
        "z_scores": z,
        "within_3se": z.iter().all(|v| v.abs() <= 3.0),
        "scales_at_freeze": samples.scales_at_freeze,
        "detailed_balance": balance,
        "validation_bypassed": samples.validation_bypassed,
    }))
}

fn dlr(m: &Manifest, seed: u64, _out: &mut Artifacts) -> Result<serde_json::Value> {
    let model = checked_model(m)?;
    let block = &m.dlr;
    let config = quenched_configuration(m, seed)?;
    let graph = GeometricGraph::build(&config, model.pair.range)?;
    let xi = build_section(&m.section, &config, model.spin_dim())?;
    let eta1 = SiteSet::new(config.len(), block.eta1.clone())?;
    let eta2 = SiteSet::new(config.len(), block.eta2.clone())?;
    let grid = QuadratureGrid::new(block.u_max, block.nodes)?;
    let mut observables = Vec::new();
    for &s in eta1.indices() {
        observables.push(Observable::power(s, 0, 1, 1));
        observables.push(Observable::power(s, 0, 2, 1));
        observables.push(Observable::tanh(s, 0, 1));
    }
    let report = dlr_consistency_check(&graph, &eta1, &eta2, &xi, model, &grid, &observables)?;
    to_json(&report)
}

fn moments(m: &Manifest, seed: u64, out: &mut Artifacts) -> Result<serde_json::Value> {
    let model = checked_model(m)?;
    let config = quenched_configuration(m, seed)?;
    let graph = GeometricGraph::build(&config, model.pair.range)?;
    let volumes = VolumeSequence::geometric(config.window(), m.volumes.count, m.volumes.ratio)?;
    let cfg = MomentStudyConfig {
        section: m.section,
        sampler: m.sampler.clone(),
        extra_design: m.moments.extra_design.clone(),
        lambda: m.moments.lambda,
        min_ess_fraction: m.moments.min_ess_fraction,
        trend_level: m.moments.trend_level,
    };
    let report = moment_study(&graph, &volumes, model, &cfg)?;
    let mut table = String::from("volume\txi_scale\tsites\tmoment\tstd_error\texp_moment\texp_std_error\tboundary_norm\n");
    for r in &report.design {
        writeln!(
            table,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.volume,
            num(r.xi_scale, m),
            r.sites,
            num(r.moment, m),
            num(r.std_error, m),
            num(r.exp_moment, m),
            num(r.exp_std_error, m),
            num(r.boundary_norm, m)
        )
        .unwrap();
    }
    write_configuration(m, &config, out)?;
    out.write("volumes.tsv", table.as_bytes())?;
    Ok(json!({ "volumes": volumes, "moments": report }))
}

fn annealed(m: &Manifest, seed: u64, out: &mut Artifacts) -> Result<serde_json::Value> {
    let model = checked_model(m)?;
    let window = m.window()?;
    let volume = match &m.annealed.volume {
        Some(v) => v.build()?.bounds,
        None => window.bounds.clone(),
    };
    let cfg = AnnealedConfig {
        section: m.section,
        sampler: m.sampler.clone(),
        num_disorder: m.annealed.num_disorder,
        seed: derive_seed(seed, PROCESS_SEED),
    };
    let (report, draws) = annealed_sample(&m.process, &window, &volume, model, &cfg)?;
    let mut set = MarkedSet::new(window, model.spin_dim(), model.pair.range, m.number_format);
    let mut table = String::from("draw\tseed\tpoints\tb_alpha\tnorm_mean\tnorm_std_error\tphi\n");
    for (k, d) in draws.iter().enumerate() {
        set.push(d.seed, &d.configuration, &d.spins)?;
        writeln!(
            table,
            "{k}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.seed,
            d.configuration.len(),
            num(d.b_alpha, m),
            num(d.norm_mean, m),
            num(d.norm_std_error, m),
            num(d.phi, m)
        )
        .unwrap();
    }
    let mut buf = Vec::new();
    save_marked(&set, &mut buf)?;
    out.write("marked.txt", &buf)?;
    out.write("draws.tsv", table.as_bytes())?;
    to_json(&report)
}

fn cesaro(m: &Manifest, seed: u64, out: &mut Artifacts) -> Result<serde_json::Value> {
    let model = checked_model(m)?;
    let config = quenched_configuration(m, seed)?;
    let graph = GeometricGraph::build(&config, model.pair.range)?;
    let volumes = VolumeSequence::geometric(config.window(), m.volumes.count, m.volumes.ratio)?;
    // Manifest sites are ranks by distance from the origin, so the same
    // manifest works for any sampled configuration.
    let mut by_radius: Vec<usize> = (0..config.len()).collect();
    by_radius.sort_by(|&a, &b| config.radius(a).total_cmp(&config.radius(b)).then(a.cmp(&b)));
    let site = |rank: usize| -> Result<usize> {
        by_radius.get(rank).copied().ok_or_else(|| Error::Manifest {
            field: "cesaro.observables".into(),
            message: format!("site rank {rank} but the configuration has {} points", config.len()),
        })
    };
    let observables = m
        .cesaro
        .observables
        .iter()
        .map(|kind| {
            Ok(match *kind {
                LocalKind::Constant { value } => LocalKind::Constant { value },
                LocalKind::Tanh { site: s, comp } => LocalKind::Tanh { site: site(s)?, comp },
                LocalKind::Cos { site: s, comp } => LocalKind::Cos { site: site(s)?, comp },
                LocalKind::TanhProduct { a, b } => LocalKind::TanhProduct { a: site(a)?, b: site(b)? },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = CesaroConfig {
        section: m.section,
        sampler: m.sampler.clone(),
        observables,
    };
    let report = cesaro_study(&graph, &volumes, model, &cfg)?;
    let mut table = String::from("observable\tvolume\tg\tg_std_error\trunning\trunning_std_error\n");
    for (k, name) in report.observables.iter().enumerate() {
        for j in 0..report.g[k].len() {
            writeln!(
                table,
                "{name}\t{j}\t{}\t{}\t{}\t{}",
                num(report.g[k][j], m),
                num(report.g_std_error[k][j], m),
                num(report.running[k][j], m),
                num(report.running_std_error[k][j], m)
            )
            .unwrap();
        }
    }
    write_configuration(m, &config, out)?;
    out.write("running.tsv", table.as_bytes())?;
    to_json(&report)
}
