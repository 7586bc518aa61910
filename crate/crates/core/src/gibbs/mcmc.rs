use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{KernelSpec, Observable};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::spin::{norm_sq, SpinField};
use crate::stats::{batch_means_std_error, mean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Sweeps during which the proposal scale adapts.
    pub burn_in: usize,
    /// Sweeps after burn-in.
    pub sweeps: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    pub initial_scale: f64,
    pub target_acceptance: f64,
    pub adapt: bool,
    pub seed: u64,
    pub store_fields: bool,
    /// Run even when the model fails validation (oracle tests with q = 2).
    pub bypass_validation: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burn_in: 2_000,
            sweeps: 20_000,
            thin: 1,
            initial_scale: 1.0,
            target_acceptance: 0.3,
            adapt: true,
            seed: 0,
            store_fields: false,
            bypass_validation: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.thin == 0 {
            return Err(Error::param("sampler", "sweeps and thin must be positive"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::param("target_acceptance", "must lie in (0, 1)"));
        }
        if !(self.initial_scale > 0.0 && self.initial_scale.is_finite()) {
            return Err(Error::param("initial_scale", "must be positive"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.sweeps / self.thin
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSampleSet {
    pub eta_size: usize,
    pub spin_dim: usize,
    pub retained: usize,
    pub burn_in_acceptance: f64,
    pub acceptance: f64,
    /// Per-site proposal scales when adaptation stopped.
    pub scales_at_freeze: Vec<f64>,
    /// Per-site proposal scales at the end of the run.
    pub scales_final: Vec<f64>,
    pub observable_names: Vec<String>,
    /// `traces[k][t]`: observable `k` after retained sweep `t`.
    pub traces: Vec<Vec<f64>>,
    /// Retained spins on `η`, row-major per sample, when requested.
    pub fields: Option<Vec<f64>>,
    pub final_state: SpinField,
    pub validation_bypassed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub eta_size: usize,
    pub acceptance: f64,
    pub observables: Vec<String>,
    pub moments: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

impl KernelSampleSet {
    pub fn mean(&self, k: usize) -> f64 {
        mean(&self.traces[k])
    }

    /// Batch-means standard error of observable `k`.
    pub fn std_error(&self, k: usize) -> f64 {
        batch_means_std_error(&self.traces[k])
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            eta_size: self.eta_size,
            acceptance: self.acceptance,
            observables: self.observable_names.clone(),
            moments: (0..self.traces.len()).map(|k| self.mean(k)).collect(),
            standard_errors: (0..self.traces.len()).map(|k| self.std_error(k)).collect(),
        }
    }

    /// One row per retained sweep, tab separated, with a header line.
    pub fn trace_text(&self) -> String {
        let mut s = String::from("sweep");
        for name in &self.observable_names {
            s.push('\t');
            s.push_str(name);
        }
        s.push('\n');
        for t in 0..self.retained {
            write!(s, "{t}").unwrap();
            for tr in &self.traces {
                write!(s, "\t{:.16e}", tr[t]).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Single-site random-walk Metropolis targeting
/// `exp(-scale (E_η(σ|ξ) + Σ_{x∈η} V(σ(x))))`.
///
/// Sites of `η` are visited in ascending index order. The per-site Gaussian
/// proposal scale follows a Robbins–Monro recursion towards the target
/// acceptance rate during burn-in and is frozen afterwards. The chain starts
/// from `σ|_η = ξ|_η`.
pub fn mcmc_sample(spec: &KernelSpec<'_>, cfg: &SamplerConfig, observables: &[Observable]) -> Result<KernelSampleSet> {
    cfg.validate()?;
    let model = spec.model;
    let report = model.validate();
    if !report.valid && !cfg.bypass_validation {
        return Err(Error::InvalidModel(report.violations));
    }
    let m = model.spin_dim();
    let beta = model.scale;
    let pair = &model.pair;
    let single = &model.single;
    let neighbors = spec.local_neighbors();
    let sites = spec.eta.indices();
    let mut state = spec.xi.values().to_vec();
    let mut rng = stream(cfg.seed);

    let mut log_scale = vec![cfg.initial_scale.ln(); sites.len()];
    let mut proposal = vec![0.0; m];
    let mut traces = vec![Vec::with_capacity(cfg.retained()); observables.len()];
    let mut fields = cfg
        .store_fields
        .then(|| Vec::with_capacity(cfg.retained() * sites.len() * m));
    let (mut accepted_burn, mut accepted_main) = (0u64, 0u64);
    let mut scales_at_freeze = Vec::new();
    let total = cfg.burn_in + cfg.sweeps;

    for sweep in 0..total {
        let burning = sweep < cfg.burn_in;
        if sweep == cfg.burn_in {
            scales_at_freeze = log_scale.iter().map(|l| l.exp()).collect();
        }
        let gain = if burning && cfg.adapt {
            1.0 / ((sweep + 1) as f64).powf(0.6)
        } else {
            0.0
        };
        for (k, &x) in sites.iter().enumerate() {
            let step = log_scale[k].exp();
            let at = x * m;
            for (c, slot) in proposal.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *slot = state[at + c] + step * z;
            }
            let current = &state[at..at + m];
            let mut delta = single.value_from_sq(norm_sq(&proposal)) - single.value_from_sq(norm_sq(current));
            for &(y, d) in &neighbors[k] {
                let other = &state[y * m..(y + 1) * m];
                delta += pair.energy_at_distance(d, &proposal, other) - pair.energy_at_distance(d, current, other);
            }
            delta *= beta;
            if !delta.is_finite() {
                return Err(Error::Divergent {
                    site: x,
                    sweep,
                    detail: format!("energy difference {delta} for proposal {proposal:?}"),
                });
            }
            let accept = delta <= 0.0 || rng.random::<f64>() < (-delta).exp();
            if accept {
                state[at..at + m].copy_from_slice(&proposal);
                if burning {
                    accepted_burn += 1;
                } else {
                    accepted_main += 1;
                }
            }
            if gain > 0.0 {
                let hit = if accept { 1.0 } else { 0.0 };
                log_scale[k] = (log_scale[k] + gain * (hit - cfg.target_acceptance)).clamp(-12.0, 8.0);
            }
        }
        if !burning && (sweep - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
            for (tr, obs) in traces.iter_mut().zip(observables) {
                tr.push(obs.eval(&state));
            }
            if let Some(f) = fields.as_mut() {
                for &x in sites {
                    f.extend_from_slice(&state[x * m..(x + 1) * m]);
                }
            }
        }
    }
    if cfg.burn_in == 0 || scales_at_freeze.is_empty() {
        scales_at_freeze = log_scale.iter().map(|l| l.exp()).collect();
    }
    let scales_final: Vec<f64> = log_scale.iter().map(|l| l.exp()).collect();
    let moves = |sweeps: usize| (sweeps * sites.len()).max(1) as f64;
    Ok(KernelSampleSet {
        eta_size: sites.len(),
        spin_dim: m,
        retained: cfg.retained(),
        burn_in_acceptance: accepted_burn as f64 / moves(cfg.burn_in),
        acceptance: accepted_main as f64 / moves(cfg.sweeps),
        scales_at_freeze,
        scales_final,
        observable_names: observables.iter().map(|o| o.name().to_string()).collect(),
        traces,
        fields,
        final_state: SpinField::new(m, state)?,
        validation_bypassed: !report.valid,
    })
}
