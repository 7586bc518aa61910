//! Finite-volume specification kernels `Π_η(dσ | ξ)`: Monte Carlo sampling,
//! an exact tensor-grid oracle for tiny scalar systems, the consistency
//! check between nested volumes, and a detailed-balance certificate for the
//! discretized sampler.

mod balance;
mod mcmc;
mod quadrature;

use std::fmt;
use std::sync::Arc;

pub use balance::{detailed_balance_check, discretized_metropolis, BalanceReport, DiscreteMetropolis};
pub use mcmc::{mcmc_sample, KernelSampleSet, KernelSummary, SamplerConfig};
pub use quadrature::{dlr_consistency_check, quadrature_kernel, DlrReport, GridKernel, QuadratureGrid};

use crate::error::{Error, Result};
use crate::graph::{GeometricGraph, WeightParams};
use crate::spin::{abs_pow, ModelParams, SiteSet, SpinField};
use crate::window::distance;

/// A volume `η`, a boundary condition `ξ` on all of `γ`, and the model.
#[derive(Debug, Clone)]
pub struct KernelSpec<'a> {
    pub graph: &'a GeometricGraph,
    pub eta: SiteSet,
    pub xi: SpinField,
    pub model: &'a ModelParams,
}

impl<'a> KernelSpec<'a> {
    pub fn new(graph: &'a GeometricGraph, eta: SiteSet, xi: SpinField, model: &'a ModelParams) -> Result<Self> {
        let n = graph.len();
        if eta.total() != n {
            return Err(Error::Domain(format!(
                "volume indexes {} points but the configuration has {n}",
                eta.total()
            )));
        }
        if xi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: xi.len(),
                context: "boundary field",
            });
        }
        if xi.dim() != model.spin_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.spin_dim(),
                found: xi.dim(),
                context: "boundary spin dimension",
            });
        }
        if graph.radius() < model.pair.range {
            return Err(Error::Domain(format!(
                "graph radius {} is shorter than the interaction range {}",
                graph.radius(),
                model.pair.range
            )));
        }
        Ok(Self { graph, eta, xi, model })
    }

    /// Neighbour lists with distances, restricted to the interaction range,
    /// for every site of `η` (in `eta.indices()` order).
    pub(crate) fn local_neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let config = self.graph.configuration();
        self.eta
            .indices()
            .iter()
            .map(|&x| {
                self.graph
                    .neighbors(x)
                    .iter()
                    .map(|&y| (y, distance(config.point(x), config.point(y))))
                    .filter(|&(_, d)| d <= self.model.pair.range)
                    .collect()
            })
            .collect()
    }
}

type ObservableFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Named real function of the full spin state (flat, row-major over `γ`).
#[derive(Clone)]
pub struct Observable {
    name: String,
    f: Arc<ObservableFn>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable").field("name", &self.name).finish()
    }
}

impl Observable {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, state: &[f64]) -> f64 {
        (self.f)(state)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c)
    }

    /// `σ(site)_comp^power`.
    pub fn power(site: usize, comp: usize, power: i32, spin_dim: usize) -> Self {
        let at = site * spin_dim + comp;
        Self::new(format!("s{site}.{comp}^{power}"), move |s| s[at].powi(power))
    }

    /// `σ(a)·σ(b)`.
    pub fn product(a: usize, b: usize, spin_dim: usize) -> Self {
        Self::new(format!("s{a}.s{b}"), move |s| {
            (0..spin_dim).map(|c| s[a * spin_dim + c] * s[b * spin_dim + c]).sum()
        })
    }

    pub fn tanh(site: usize, comp: usize, spin_dim: usize) -> Self {
        let at = site * spin_dim + comp;
        Self::new(format!("tanh(s{site}.{comp})"), move |s| s[at].tanh())
    }

    /// `‖σ‖_{α,p}^p` of the whole field.
    pub fn tempered_norm_pow(graph: &GeometricGraph, w: &WeightParams, p: f64, spin_dim: usize) -> Self {
        let weights = w.weights(graph.configuration());
        Self::new(format!("norm_pow(alpha={}, p={p})", w.alpha), move |s| {
            weights
                .iter()
                .enumerate()
                .map(|(i, wi)| wi * abs_pow(&s[i * spin_dim..(i + 1) * spin_dim], p))
                .sum()
        })
    }
}
