//! Quenched and annealed studies on top of the finite-volume kernels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{mcmc_sample, KernelSpec, Observable, SamplerConfig};
use crate::graph::{functional_a, functional_b, GeometricGraph, WeightParams};
use crate::point_process::ProcessSpec;
use crate::rng::derive_seed;
use crate::spin::{abs_pow, ModelParams, SiteSet, SpinField};
use crate::stats::{hill_tail_index, mann_kendall, nnls, MannKendall, NnlsFit, SampleSummary};
use crate::window::{Bounds, Configuration, Window};

/// Deterministic boundary field `ξ_γ = (u(x))_{x∈γ}`, pointing along the
/// first spin axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
#[derive(Default)]
pub enum BoundarySection {
    #[default]
    Zero,
    Constant { c: f64 },
    /// `|u(x)| = c e^{β|x|}`.
    Radial { c: f64, beta: f64 },
}


impl BoundarySection {
    pub fn validate(&self) -> Result<()> {
        let (c, beta) = self.constants();
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::param("section.c", "must be finite and >= 0"));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::param("section.beta", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// `(c, β)`; the zero rule is `(0, 0)`.
    pub fn constants(&self) -> (f64, f64) {
        match *self {
            BoundarySection::Zero => (0.0, 0.0),
            BoundarySection::Constant { c } => (c, 0.0),
            BoundarySection::Radial { c, beta } => (c, beta),
        }
    }

    pub fn magnitude(&self, radius: f64) -> f64 {
        let (c, beta) = self.constants();
        if beta == 0.0 {
            c
        } else {
            c * (beta * radius).exp()
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        match *self {
            BoundarySection::Zero => BoundarySection::Zero,
            BoundarySection::Constant { c } => BoundarySection::Constant { c: c * t },
            BoundarySection::Radial { c, beta } => BoundarySection::Radial { c: c * t, beta },
        }
    }

    /// Smallest admissible `α'` for the temperedness bound is anything above
    /// `p β`.
    pub fn alpha_threshold(&self, p: f64) -> f64 {
        p * self.constants().1
    }

    /// Rejects rules whose growth `e^{β|x|}` is not absorbed by the weight
    /// `e^{-α|x|}` of the tempered norm.
    pub fn check_tempered(&self, model: &ModelParams) -> Result<()> {
        self.validate()?;
        let (alpha, p) = (model.tempered.alpha, model.tempered.p);
        let threshold = self.alpha_threshold(p);
        if threshold > 0.0 && !(alpha > threshold) {
            return Err(Error::param(
                "section.beta",
                format!("alpha > p*beta violated: alpha = {alpha}, p*beta = {threshold}"),
            ));
        }
        Ok(())
    }
}

pub fn build_section(rule: &BoundarySection, config: &Configuration, spin_dim: usize) -> Result<SpinField> {
    rule.validate()?;
    let mut field = SpinField::zeros(config.len(), spin_dim);
    if matches!(rule, BoundarySection::Zero) {
        return Ok(field);
    }
    for i in 0..config.len() {
        field.get_mut(i)[0] = rule.magnitude(config.radius(i));
    }
    Ok(field)
}

/// Strictly increasing boxes ending at the full window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSequence {
    pub boxes: Vec<Bounds>,
}

impl VolumeSequence {
    pub fn new(window: &Window, boxes: Vec<Bounds>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::param("volumes", "need at least one volume"));
        }
        for pair in boxes.windows(2) {
            if !pair[0].is_within(&pair[1]) || pair[0] == pair[1] {
                return Err(Error::param("volumes", "boxes must be strictly increasing"));
            }
        }
        if boxes.last() != Some(&window.bounds) {
            return Err(Error::param("volumes", "the last box must be the window"));
        }
        Ok(Self { boxes })
    }

    /// `count` boxes centred at the window origin whose half-sides grow by
    /// `ratio` per step, clipped to the window; the last is the window.
    pub fn geometric(window: &Window, count: usize, ratio: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("volumes.count", "must be positive"));
        }
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(Error::param("volumes.ratio", "must exceed 1"));
        }
        let b = &window.bounds;
        let o = &window.origin;
        let reach: Vec<f64> = (0..b.dim())
            .map(|a| (o[a] - b.lower[a]).max(b.upper[a] - o[a]))
            .collect();
        let boxes = (0..count)
            .map(|k| {
                if k + 1 == count {
                    return Ok(b.clone());
                }
                let shrink = ratio.powi((count - 1 - k) as i32);
                let lower = (0..b.dim()).map(|a| (o[a] - reach[a] / shrink).max(b.lower[a])).collect();
                let upper = (0..b.dim()).map(|a| (o[a] + reach[a] / shrink).min(b.upper[a])).collect();
                Bounds::new(lower, upper)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(window, boxes)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn site_sets(&self, config: &Configuration) -> Vec<SiteSet> {
        self.boxes.iter().map(|b| SiteSet::in_bounds(config, b)).collect()
    }
}

/// `Σ_{x∈γ\η} w_α(x) |ξ(x)|^p`.
pub fn boundary_norm_pow(config: &Configuration, xi: &SpinField, eta: &SiteSet, w: &WeightParams, p: f64) -> f64 {
    (0..config.len())
        .filter(|&i| !eta.contains(i))
        .map(|i| w.weight(config.point(i)) * abs_pow(xi.get(i), p))
        .sum()
}

fn norm_observable(graph: &GeometricGraph, w: &WeightParams, model: &ModelParams) -> Observable {
    Observable::tempered_norm_pow(graph, w, model.tempered.p, model.spin_dim())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub volume: usize,
    pub xi_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentStudyConfig {
    pub section: BoundarySection,
    pub sampler: SamplerConfig,
    /// Extra (volume, ξ-scale) runs added to the regression design on top of
    /// the unit-scale run for every volume.
    pub extra_design: Vec<DesignPoint>,
    /// Exponential-moment parameter; defaults to `0.1 a_V`.
    pub lambda: Option<f64>,
    /// Minimum `ESS / n` for the exponential moment to count as resolved.
    pub min_ess_fraction: f64,
    pub trend_level: f64,
}

impl Default for MomentStudyConfig {
    fn default() -> Self {
        Self {
            section: BoundarySection::Zero,
            sampler: SamplerConfig::default(),
            extra_design: Vec::new(),
            lambda: None,
            min_ess_fraction: 0.1,
            trend_level: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMoment {
    pub volume: usize,
    pub xi_scale: f64,
    pub sites: usize,
    pub moment: f64,
    pub std_error: f64,
    pub exp_moment: f64,
    pub exp_std_error: f64,
    pub exp_ess: f64,
    pub exp_resolved: bool,
    pub hill_index: Option<f64>,
    pub acceptance: f64,
    /// `‖ξ_{γ\η}‖^p_{α,p}`.
    pub boundary_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub alpha: f64,
    pub p: f64,
    pub p_prime: f64,
    pub lambda: f64,
    pub b_alpha: f64,
    pub a_alpha_p_prime: f64,
    /// Unit-scale run for each volume, in volume order.
    pub series: Vec<VolumeMoment>,
    /// Every run entering the regression.
    pub design: Vec<VolumeMoment>,
    pub trend: MannKendall,
    pub trend_significant: bool,
    /// `(Ĉ₁, Ĉ₂, Ĉ₃)` for `(b_α, a_{α,p'}, ‖ξ_{γ\η}‖^p)`.
    pub constants: [f64; 3],
    pub fit: NnlsFit,
    /// Largest exponential-moment estimate plus three standard errors.
    pub xi_stand_in: f64,
    pub min_hill_index: Option<f64>,
    pub all_finite: bool,
}

/// Log-mean-exp estimate of `E exp(λ X)` with batch-means error and the
/// importance-weight effective sample size `(Σw)^2 / Σw^2`.
fn exp_moment(trace: &[f64], lambda: f64) -> (f64, f64, f64) {
    let n = trace.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0.0);
    }
    let top = trace.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(lambda * x));
    let scaled: Vec<f64> = trace.iter().map(|&x| (lambda * x - top).exp()).collect();
    let s1: f64 = scaled.iter().sum();
    let s2: f64 = scaled.iter().map(|w| w * w).sum();
    let factor = top.exp();
    let est = factor * s1 / n as f64;
    let se = factor * crate::stats::batch_means_std_error(&scaled);
    (est, se, s1 * s1 / s2)
}

pub fn moment_study(
    graph: &GeometricGraph,
    volumes: &VolumeSequence,
    model: &ModelParams,
    cfg: &MomentStudyConfig,
) -> Result<MomentReport> {
    model.require_valid()?;
    cfg.section.check_tempered(model)?;
    let config = graph.configuration();
    let w = model.weights(config)?;
    let p = model.tempered.p;
    let p_prime = model.p_prime();
    let (a_v, _) = model.single.stability();
    let lambda = cfg.lambda.unwrap_or(0.1 * a_v);
    if !(lambda >= 0.0 && lambda <= 0.1 * a_v + 1e-15) {
        return Err(Error::param("lambda", format!("must lie in [0, 0.1 a_V] = [0, {}]", 0.1 * a_v)));
    }
    let b_alpha = functional_b(config, &w);
    let a_alpha = functional_a(graph, &w, p_prime)?;
    let sets = volumes.site_sets(config);
    let norm = norm_observable(graph, &w, model);

    let mut runs: Vec<DesignPoint> = (0..volumes.len())
        .map(|volume| DesignPoint { volume, xi_scale: 1.0 })
        .collect();
    for d in &cfg.extra_design {
        if d.volume >= volumes.len() {
            return Err(Error::param("extra_design", format!("volume {} out of range", d.volume)));
        }
        runs.push(*d);
    }
    let results: Vec<VolumeMoment> = runs
        .par_iter()
        .enumerate()
        .map(|(k, d)| {
            let section = cfg.section.scaled(d.xi_scale);
            let xi = build_section(&section, config, model.spin_dim())?;
            let eta = sets[d.volume].clone();
            let boundary_norm = boundary_norm_pow(config, &xi, &eta, &w, p);
            let spec = KernelSpec::new(graph, eta, xi, model)?;
            let sampler = cfg.sampler.with_seed(derive_seed(cfg.sampler.seed, k as u64));
            let set = mcmc_sample(&spec, &sampler, std::slice::from_ref(&norm)).map_err(|e| {
                e.context(format!("volume {} (xi scale {})", d.volume, d.xi_scale))
            })?;
            let trace = &set.traces[0];
            let (exp_m, exp_se, ess) = exp_moment(trace, lambda);
            Ok(VolumeMoment {
                volume: d.volume,
                xi_scale: d.xi_scale,
                sites: set.eta_size,
                moment: set.mean(0),
                std_error: set.std_error(0),
                exp_moment: exp_m,
                exp_std_error: exp_se,
                exp_ess: ess,
                exp_resolved: ess >= cfg.min_ess_fraction * trace.len() as f64,
                hill_index: hill_tail_index(trace),
                acceptance: set.acceptance,
                boundary_norm,
            })
        })
        .collect::<Result<_>>()?;

    let series: Vec<VolumeMoment> = results[..volumes.len()].to_vec();
    let moments: Vec<f64> = series.iter().map(|r| r.moment).collect();
    let trend = mann_kendall(&moments);
    let rows: Vec<Vec<f64>> = results
        .iter()
        .map(|r| vec![b_alpha, a_alpha, r.boundary_norm])
        .collect();
    let y: Vec<f64> = results.iter().map(|r| r.moment).collect();
    let fit = nnls(&rows, &y);
    let constants = [fit.coefficients[0], fit.coefficients[1], fit.coefficients[2]];
    let xi_stand_in = results
        .iter()
        .map(|r| r.exp_moment + 3.0 * r.exp_std_error)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_hill_index = results
        .iter()
        .filter_map(|r| r.hill_index)
        .reduce(f64::min);
    let all_finite = results
        .iter()
        .all(|r| r.moment.is_finite() && r.std_error.is_finite() && r.exp_moment.is_finite());
    Ok(MomentReport {
        alpha: w.alpha,
        p,
        p_prime,
        lambda,
        b_alpha,
        a_alpha_p_prime: a_alpha,
        series,
        design: results,
        trend_significant: trend.p_increasing < cfg.trend_level,
        trend,
        constants,
        fit,
        xi_stand_in,
        min_hill_index,
        all_finite,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealedConfig {
    pub section: BoundarySection,
    pub sampler: SamplerConfig,
    pub num_disorder: usize,
    pub seed: u64,
}

impl Default for AnnealedConfig {
    fn default() -> Self {
        Self {
            section: BoundarySection::Zero,
            sampler: SamplerConfig::default(),
            num_disorder: 100,
            seed: 0,
        }
    }
}

/// One draw of the annealed measure: `γ ~ μ`, then `σ ~ Π_{γ_Δ}(·|ξ_γ)`.
#[derive(Debug, Clone)]
pub struct AnnealedDraw {
    pub seed: u64,
    pub configuration: Configuration,
    /// Last retained chain state on all of `γ`.
    pub spins: SpinField,
    pub b_alpha: f64,
    /// Chain average of `‖σ‖^p_{α,p}` given `γ`.
    pub norm_mean: f64,
    pub norm_std_error: f64,
    /// `φ = b_α(γ) + ‖σ‖^p_{α,p}` at the recorded state.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealedReport {
    pub num_disorder: usize,
    pub volume: Bounds,
    pub empty_fraction: f64,
    pub phi: SampleSummary,
    pub b_alpha: SampleSummary,
    pub norm: SampleSummary,
    /// `E b_α + E[E(‖σ‖^p | γ)]`, the lower-variance estimate of `E φ`.
    pub phi_decomposed: f64,
    pub phi_decomposed_std_error: f64,
}

pub fn annealed_sample(
    process: &ProcessSpec,
    window: &Window,
    volume: &Bounds,
    model: &ModelParams,
    cfg: &AnnealedConfig,
) -> Result<(AnnealedReport, Vec<AnnealedDraw>)> {
    model.require_valid()?;
    cfg.section.check_tempered(model)?;
    process.validate()?;
    if !volume.is_within(&window.bounds) {
        return Err(Error::Domain("volume must lie inside the window".into()));
    }
    if cfg.num_disorder == 0 {
        return Err(Error::param("num_disorder", "must be positive"));
    }
    let draws: Vec<AnnealedDraw> = (0..cfg.num_disorder)
        .into_par_iter()
        .map(|d| {
            let seed = derive_seed(cfg.seed, d as u64);
            let config = process.sample(window, derive_seed(seed, 0))?;
            let graph = GeometricGraph::build(&config, model.pair.range)?;
            let w = model.weights(&config)?;
            let xi = build_section(&cfg.section, &config, model.spin_dim())?;
            let eta = SiteSet::in_bounds(&config, volume);
            let spec = KernelSpec::new(&graph, eta, xi, model)?;
            let sampler = cfg.sampler.with_seed(derive_seed(seed, 1));
            let norm = norm_observable(&graph, &w, model);
            let set = mcmc_sample(&spec, &sampler, std::slice::from_ref(&norm))
                .map_err(|e| e.context(format!("disorder draw {d}")))?;
            let b_alpha = functional_b(&config, &w);
            let last = set.traces[0].last().copied().unwrap_or(0.0);
            Ok(AnnealedDraw {
                seed,
                spins: set.final_state.clone(),
                configuration: config,
                b_alpha,
                norm_mean: set.mean(0),
                norm_std_error: set.std_error(0),
                phi: b_alpha + last,
            })
        })
        .collect::<Result<_>>()?;
    let n = draws.len() as f64;
    let b: Vec<f64> = draws.iter().map(|d| d.b_alpha).collect();
    let norms: Vec<f64> = draws.iter().map(|d| d.norm_mean).collect();
    let decomposed: Vec<f64> = draws.iter().map(|d| d.b_alpha + d.norm_mean).collect();
    let dec = SampleSummary::from_values(decomposed);
    let report = AnnealedReport {
        num_disorder: draws.len(),
        volume: volume.clone(),
        empty_fraction: draws.iter().filter(|d| d.configuration.is_empty()).count() as f64 / n,
        phi: SampleSummary::from_values(draws.iter().map(|d| d.phi).collect()),
        b_alpha: SampleSummary::from_values(b),
        norm: SampleSummary::from_values(norms),
        phi_decomposed: dec.mean,
        phi_decomposed_std_error: dec.std_error,
    };
    Ok((report, draws))
}

/// Bounded continuous functions of a few spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalKind {
    Constant { value: f64 },
    Tanh { site: usize, comp: usize },
    Cos { site: usize, comp: usize },
    /// `tanh(σ(a)·σ(b))`.
    TanhProduct { a: usize, b: usize },
}

impl LocalKind {
    pub fn sites(&self) -> Vec<usize> {
        match *self {
            LocalKind::Constant { .. } => Vec::new(),
            LocalKind::Tanh { site, .. } | LocalKind::Cos { site, .. } => vec![site],
            LocalKind::TanhProduct { a, b } => vec![a, b],
        }
    }

    pub fn observable(&self, spin_dim: usize) -> Result<Observable> {
        let m = spin_dim;
        match *self {
            LocalKind::Constant { value } => Ok(Observable::constant(value)),
            LocalKind::Tanh { site, comp } | LocalKind::Cos { site, comp } if comp >= m => {
                Err(Error::param("observable", format!("component {comp} of site {site} exceeds m = {m}")))
            }
            LocalKind::Tanh { site, comp } => Ok(Observable::tanh(site, comp, m)),
            LocalKind::Cos { site, comp } => {
                let at = site * m + comp;
                Ok(Observable::new(format!("cos(s{site}.{comp})"), move |s| s[at].cos()))
            }
            LocalKind::TanhProduct { a, b } => Ok(Observable::new(format!("tanh(s{a}.s{b})"), move |s| {
                (0..m).map(|c| s[a * m + c] * s[b * m + c]).sum::<f64>().tanh()
            })),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CesaroConfig {
    pub section: BoundarySection,
    pub sampler: SamplerConfig,
    pub observables: Vec<LocalKind>,
}

impl Default for CesaroConfig {
    fn default() -> Self {
        Self {
            section: BoundarySection::Zero,
            sampler: SamplerConfig::default(),
            observables: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroReport {
    pub observables: Vec<String>,
    /// `g[m][j]`: estimate of observable `m` under volume `j`.
    pub g: Vec<Vec<f64>>,
    pub g_std_error: Vec<Vec<f64>>,
    /// `running[m][n] = (g[m][0] + .. + g[m][n]) / (n + 1)`.
    pub running: Vec<Vec<f64>>,
    pub running_std_error: Vec<Vec<f64>>,
    /// First index of the tail (last third of the running means).
    pub tail_start: usize,
    pub tail_fluctuation: Vec<f64>,
    /// `√2` times the largest running-mean error over the tail.
    pub combined_std_error: Vec<f64>,
    pub stable: Vec<bool>,
}

/// Running means over `g`, summed from scratch for every prefix.
pub fn cesaro_means(g: &[f64]) -> Vec<f64> {
    (1..=g.len()).map(|n| g[..n].iter().sum::<f64>() / n as f64).collect()
}

pub fn cesaro_study(
    graph: &GeometricGraph,
    volumes: &VolumeSequence,
    model: &ModelParams,
    cfg: &CesaroConfig,
) -> Result<CesaroReport> {
    model.require_valid()?;
    cfg.section.check_tempered(model)?;
    let config = graph.configuration();
    let sets = volumes.site_sets(config);
    let smallest = &sets[0];
    let mut observables = Vec::with_capacity(cfg.observables.len());
    for kind in &cfg.observables {
        if let Some(bad) = kind.sites().into_iter().find(|&s| !smallest.contains(s)) {
            return Err(Error::Domain(format!(
                "observable support site {bad} is not inside the smallest volume"
            )));
        }
        observables.push(kind.observable(model.spin_dim())?);
    }
    let xi = build_section(&cfg.section, config, model.spin_dim())?;
    let per_volume: Vec<(Vec<f64>, Vec<f64>)> = sets
        .par_iter()
        .enumerate()
        .map(|(j, eta)| {
            let spec = KernelSpec::new(graph, eta.clone(), xi.clone(), model)?;
            let sampler = cfg.sampler.with_seed(derive_seed(cfg.sampler.seed, j as u64));
            let set = mcmc_sample(&spec, &sampler, &observables).map_err(|e| e.context(format!("volume {j}")))?;
            let means = (0..observables.len()).map(|k| set.mean(k)).collect();
            let errors = (0..observables.len()).map(|k| set.std_error(k)).collect();
            Ok((means, errors))
        })
        .collect::<Result<_>>()?;
    let n_obs = observables.len();
    let n_vol = sets.len();
    let g: Vec<Vec<f64>> = (0..n_obs).map(|m| per_volume.iter().map(|v| v.0[m]).collect()).collect();
    let g_std_error: Vec<Vec<f64>> = (0..n_obs).map(|m| per_volume.iter().map(|v| v.1[m]).collect()).collect();
    let running: Vec<Vec<f64>> = g.iter().map(|row| cesaro_means(row)).collect();
    let running_std_error: Vec<Vec<f64>> = g_std_error
        .iter()
        .map(|row| {
            (1..=n_vol)
                .map(|n| row[..n].iter().map(|s| s * s).sum::<f64>().sqrt() / n as f64)
                .collect()
        })
        .collect();
    let tail_start = n_vol - n_vol.div_ceil(3);
    let mut tail_fluctuation = Vec::with_capacity(n_obs);
    let mut combined_std_error = Vec::with_capacity(n_obs);
    for m in 0..n_obs {
        let tail = &running[m][tail_start..];
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        tail_fluctuation.push(hi - lo);
        let se = running_std_error[m][tail_start..].iter().copied().fold(0.0, f64::max);
        combined_std_error.push(std::f64::consts::SQRT_2 * se);
    }
    let stable = tail_fluctuation
        .iter()
        .zip(&combined_std_error)
        .map(|(f, s)| *f == 0.0 || *f < 3.0 * s)
        .collect();
    Ok(CesaroReport {
        observables: observables.iter().map(|o| o.name().to_string()).collect(),
        g,
        g_std_error,
        running,
        running_std_error,
        tail_start,
        tail_fluctuation,
        combined_std_error,
        stable,
    })
}
