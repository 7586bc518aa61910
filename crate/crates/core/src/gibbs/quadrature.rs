use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KernelSpec, Observable};
use crate::error::{Error, Result};
use crate::graph::GeometricGraph;
use crate::spin::{ModelParams, SinglePotential, SiteSet, SpinField};
use crate::stats::CompensatedSum;

/// Largest tensor grid materialized by [`GridKernel::weights`].
const MAX_MATERIALIZED: usize = 1 << 24;
const MAX_SITES: usize = 3;
const TAIL_TOLERANCE: f64 = 1e-12;

/// Uniform trapezoid rule on `[-u_max, u_max]` with an odd node count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub u_max: f64,
    pub nodes: usize,
}

impl QuadratureGrid {
    pub fn new(u_max: f64, nodes: usize) -> Result<Self> {
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(Error::param("u_max", "must be positive and finite"));
        }
        if nodes < 3 || nodes.is_multiple_of(2) {
            return Err(Error::param("nodes", format!("must be odd and at least 3, got {nodes}")));
        }
        Ok(Self { u_max, nodes })
    }

    /// Smallest `u_max` on a 0.25 lattice whose tail bound passes for
    /// `exp(-scale V)`.
    pub fn with_tail_rule(single: &SinglePotential, scale: f64, nodes: usize) -> Result<Self> {
        let mut u = 0.25;
        while u < 1e3 {
            let grid = Self::new(u, nodes)?;
            if grid.tail_bound(single, scale) < TAIL_TOLERANCE {
                return Ok(grid);
            }
            u += 0.25;
        }
        Err(Error::Domain("no truncation satisfies the tail rule".into()))
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.u_max / (self.nodes - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        let half = (self.nodes / 2) as isize;
        (-half..=half).map(|k| k as f64 * h).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.nodes];
        w[0] *= 0.5;
        w[self.nodes - 1] *= 0.5;
        w
    }

    /// Upper bound on `∫_{|u|>u_max} e^{-scale V} / ∫ e^{-scale V}` from
    /// `V >= a_V |u|^q - b_V`; the denominator is the grid sum itself.
    pub fn tail_bound(&self, single: &SinglePotential, scale: f64) -> f64 {
        let (a_v, b_v) = single.stability();
        let (a, b) = (scale * a_v, scale * b_v);
        let q = single.q;
        if !(a > 0.0) || !b.is_finite() || q < 1.0 {
            return f64::INFINITY;
        }
        let u = self.u_max;
        let tail = 2.0 * (b - a * u.powf(q)).exp() / (a * q * u.powf(q - 1.0));
        let z: f64 = self
            .points()
            .iter()
            .zip(self.weights())
            .map(|(&x, w)| w * (-scale * single.value(&[x])).exp())
            .sum();
        tail / z
    }

    pub fn check_tail(&self, single: &SinglePotential, scale: f64) -> Result<()> {
        let bound = self.tail_bound(single, scale);
        if bound < TAIL_TOLERANCE {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "truncation at u_max = {} leaves tail mass up to {bound:e}",
                self.u_max
            )))
        }
    }
}

/// Exact grid version of a kernel with `|η| <= 3`, `m = 1`.
///
/// The log weight of a node `(i_1, .., i_k)` is
/// `Σ_l ln h_l - scale (Σ_l V(u_{i_l}) + E_η)`, with the trapezoid weights
/// `h_l`, normalized so that all node weights sum to one.
#[derive(Debug, Clone)]
pub struct GridKernel {
    grid: QuadratureGrid,
    nodes: Vec<f64>,
    sites: Vec<usize>,
    /// Per slot: trapezoid weight, single-site potential and boundary field.
    site_log: Vec<Vec<f64>>,
    /// `pairs_at[b]`: tables `-scale W(u_i, u_j)` for slots `a < b`, indexed `i * G + j`.
    pairs_at: Vec<Vec<(usize, Vec<f64>)>>,
    base: Vec<f64>,
    log_max: f64,
    log_norm: f64,
}

pub fn quadrature_kernel(spec: &KernelSpec<'_>, grid: &QuadratureGrid) -> Result<GridKernel> {
    let model = spec.model;
    if model.spin_dim() != 1 {
        return Err(Error::Domain("quadrature oracle requires spin dimension 1".into()));
    }
    let k = spec.eta.len();
    if k > MAX_SITES {
        return Err(Error::TooLarge(format!(
            "quadrature oracle handles at most {MAX_SITES} sites, got {k}"
        )));
    }
    grid.check_tail(&model.single, model.scale)?;
    let g = grid.nodes;
    let beta = model.scale;
    let nodes = grid.points();
    let trap = grid.weights();
    let neighbors = spec.local_neighbors();
    let xi = spec.xi.values();
    let sites = spec.eta.indices().to_vec();

    let mut site_log = Vec::with_capacity(k);
    let mut pairs_at: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); k];
    for (slot, nbrs) in neighbors.iter().enumerate() {
        let row: Vec<f64> = nodes
            .iter()
            .zip(&trap)
            .map(|(&u, &h)| {
                let field: f64 = nbrs
                    .iter()
                    .filter(|(y, _)| !spec.eta.contains(*y))
                    .map(|&(y, d)| model.pair.energy_at_distance(d, &[u], &[xi[y]]))
                    .sum();
                h.ln() - beta * (model.single.value(&[u]) + field)
            })
            .collect();
        site_log.push(row);
        for &(y, d) in nbrs {
            let Some(other) = spec.eta.slot(y) else { continue };
            if other >= slot {
                continue;
            }
            let mut table = vec![0.0; g * g];
            for (i, &ua) in nodes.iter().enumerate() {
                for (j, &ub) in nodes.iter().enumerate() {
                    table[i * g + j] = -beta * model.pair.energy_at_distance(d, &[ua], &[ub]);
                }
            }
            pairs_at[slot].push((other, table));
        }
    }
    let mut kernel = GridKernel {
        grid: *grid,
        nodes,
        sites,
        site_log,
        pairs_at,
        base: xi.to_vec(),
        log_max: 0.0,
        log_norm: 0.0,
    };
    kernel.normalize()?;
    Ok(kernel)
}

impl GridKernel {
    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len().pow(self.sites.len() as u32)
    }

    /// `ln Z` including the trapezoid weights.
    pub fn log_partition(&self) -> f64 {
        self.log_norm
    }

    /// Unnormalized log weight of a node.
    pub fn log_weight(&self, idx: &[usize]) -> f64 {
        let g = self.nodes.len();
        let mut lw = 0.0;
        for (level, &i) in idx.iter().enumerate() {
            lw += self.site_log[level][i];
            for (a, table) in &self.pairs_at[level] {
                lw += table[idx[*a] * g + i];
            }
        }
        lw
    }

    fn descend<F: FnMut(&[usize], f64)>(&self, level: usize, idx: &mut [usize], acc: f64, f: &mut F) {
        if level == idx.len() {
            f(idx, acc);
            return;
        }
        let g = self.nodes.len();
        for i in 0..g {
            idx[level] = i;
            let mut lw = acc + self.site_log[level][i];
            for (a, table) in &self.pairs_at[level] {
                lw += table[idx[*a] * g + i];
            }
            self.descend(level + 1, idx, lw, f);
        }
    }

    /// Visits every node with its unnormalized log weight; `init` builds
    /// the per-chunk accumulator. Chunks are combined in order so the result
    /// does not depend on the thread count.
    fn fold<T, I, F>(&self, init: I, visit: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> T + Sync,
        F: Fn(&mut T, &[usize], f64) + Sync,
    {
        let k = self.sites.len();
        if k == 0 {
            let mut acc = init();
            visit(&mut acc, &[], 0.0);
            return vec![acc];
        }
        (0..self.nodes.len())
            .into_par_iter()
            .map(|i0| {
                let mut acc = init();
                let mut idx = vec![0; k];
                idx[0] = i0;
                let start = self.site_log[0][i0];
                self.descend(1, &mut idx, start, &mut |idx, lw| visit(&mut acc, idx, lw));
                acc
            })
            .collect()
    }

    fn normalize(&mut self) -> Result<()> {
        let maxima = self.fold(|| f64::NEG_INFINITY, |m, _, lw| *m = m.max(lw));
        let log_max = maxima.into_iter().fold(f64::NEG_INFINITY, f64::max);
        if !log_max.is_finite() {
            return Err(Error::Domain("quadrature weights are not finite".into()));
        }
        let sums = self.fold(CompensatedSum::default, |s, _, lw| s.add((lw - log_max).exp()));
        let mut total = CompensatedSum::default();
        for s in sums {
            total.add(s.value());
        }
        self.log_max = log_max;
        self.log_norm = log_max + total.value().ln();
        Ok(())
    }

    /// Normalized weights in row-major order (first site slowest).
    pub fn weights(&self) -> Result<Vec<f64>> {
        let n = self.node_count();
        if n > MAX_MATERIALIZED {
            return Err(Error::TooLarge(format!("{n} grid nodes")));
        }
        let mut out = Vec::with_capacity(n);
        let mut idx = vec![0; self.sites.len()];
        if idx.is_empty() {
            out.push(1.0);
        } else {
            self.descend(0, &mut idx, 0.0, &mut |_, lw| out.push((lw - self.log_norm).exp()));
        }
        Ok(out)
    }

    /// Sum of the normalized weights.
    pub fn total_mass(&self) -> f64 {
        let parts = self.fold(CompensatedSum::default, |s, _, lw| s.add((lw - self.log_norm).exp()));
        let mut total = CompensatedSum::default();
        for p in parts {
            total.add(p.value());
        }
        total.value()
    }

    /// One-site marginal of slot `slot` on the grid.
    pub fn marginal(&self, slot: usize) -> Vec<f64> {
        let g = self.nodes.len();
        let parts = self.fold(
            || vec![CompensatedSum::default(); g],
            |acc, idx, lw| acc[idx[slot]].add((lw - self.log_norm).exp()),
        );
        let mut out = vec![CompensatedSum::default(); g];
        for part in parts {
            for (o, p) in out.iter_mut().zip(part) {
                o.add(p.value());
            }
        }
        out.iter().map(CompensatedSum::value).collect()
    }

    /// The full state at a node: `ξ` off `η`, grid values on `η`.
    pub fn state_at(&self, idx: &[usize]) -> Vec<f64> {
        let mut s = self.base.clone();
        for (&x, &i) in self.sites.iter().zip(idx) {
            s[x] = self.nodes[i];
        }
        s
    }

    /// Exact grid expectations of `observables`.
    pub fn expectations(&self, observables: &[Observable]) -> Vec<f64> {
        let n = observables.len();
        let parts = self.fold(
            || (self.base.clone(), vec![CompensatedSum::default(); n]),
            |(state, sums), idx, lw| {
                for (&x, &i) in self.sites.iter().zip(idx) {
                    state[x] = self.nodes[i];
                }
                let w = (lw - self.log_norm).exp();
                for (s, obs) in sums.iter_mut().zip(observables) {
                    s.add(w * obs.eval(state));
                }
            },
        );
        let mut out = vec![CompensatedSum::default(); n];
        for (_, part) in parts {
            for (o, p) in out.iter_mut().zip(part) {
                o.add(p.value());
            }
        }
        out.iter().map(CompensatedSum::value).collect()
    }

    /// Single-threaded variant for small kernels evaluated many times.
    fn expectations_seq(&self, observables: &[Observable]) -> Vec<f64> {
        let mut state = self.base.clone();
        let mut sums = vec![CompensatedSum::default(); observables.len()];
        let mut idx = vec![0; self.sites.len()];
        let mut visit = |idx: &[usize], lw: f64| {
            for (&x, &i) in self.sites.iter().zip(idx) {
                state[x] = self.nodes[i];
            }
            let w = (lw - self.log_norm).exp();
            for (s, obs) in sums.iter_mut().zip(observables) {
                s.add(w * obs.eval(&state));
            }
        };
        if idx.is_empty() {
            visit(&[], 0.0);
        } else {
            self.descend(0, &mut idx, 0.0, &mut visit);
        }
        sums.iter().map(CompensatedSum::value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlrReport {
    pub eta1: Vec<usize>,
    pub eta2: Vec<usize>,
    pub grid: QuadratureGrid,
    pub observables: Vec<String>,
    /// `∫ Π_{η1}(f|σ) Π_{η2}(dσ|ξ)` per observable.
    pub nested: Vec<f64>,
    /// `Π_{η2}(f|ξ)` per observable.
    pub direct: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Compares both sides of the consistency relation `Π_{η2} Π_{η1} = Π_{η2}`
/// on the tensor grid. The inner kernel is tabulated for every grid value of
/// the spins in `η2 \ η1`.
pub fn dlr_consistency_check(
    graph: &GeometricGraph,
    eta1: &SiteSet,
    eta2: &SiteSet,
    xi: &SpinField,
    model: &ModelParams,
    grid: &QuadratureGrid,
    observables: &[Observable],
) -> Result<DlrReport> {
    if !eta1.is_subset_of(eta2) {
        return Err(Error::Domain("inner volume must be contained in the outer one".into()));
    }
    let outer_spec = KernelSpec::new(graph, eta2.clone(), xi.clone(), model)?;
    let outer = quadrature_kernel(&outer_spec, grid)?;
    let direct = outer.expectations(observables);

    let rest: Vec<usize> = eta2.indices().iter().copied().filter(|&x| !eta1.contains(x)).collect();
    let rest_slots: Vec<usize> = rest.iter().map(|&x| eta2.slot(x).expect("subset")).collect();
    let g = grid.nodes;
    let table_len = g.pow(rest.len() as u32);
    let nodes = grid.points();

    let inner_table: Vec<Vec<f64>> = (0..if rest.is_empty() { 0 } else { table_len })
        .into_par_iter()
        .map(|t| {
            let mut boundary = xi.clone();
            let mut code = t;
            for &x in rest.iter().rev() {
                boundary.get_mut(x)[0] = nodes[code % g];
                code /= g;
            }
            let spec = KernelSpec::new(graph, eta1.clone(), boundary, model)?;
            Ok(quadrature_kernel(&spec, grid)?.expectations_seq(observables))
        })
        .collect::<Result<_>>()?;

    let nested = if rest.is_empty() {
        // The inner kernel does not depend on the integration variable;
        // evaluate it exactly like the outer one.
        let spec = KernelSpec::new(graph, eta1.clone(), xi.clone(), model)?;
        quadrature_kernel(&spec, grid)?.expectations(observables)
    } else {
        let n = observables.len();
        let parts = outer.fold(
            || vec![CompensatedSum::default(); n],
            |sums, idx, lw| {
                let code = rest_slots.iter().fold(0, |c, &s| c * g + idx[s]);
                let w = (lw - outer.log_norm).exp();
                for (s, v) in sums.iter_mut().zip(&inner_table[code]) {
                    s.add(w * v);
                }
            },
        );
        let mut out = vec![CompensatedSum::default(); n];
        for part in parts {
            for (o, p) in out.iter_mut().zip(part) {
                o.add(p.value());
            }
        }
        out.iter().map(CompensatedSum::value).collect()
    };
    let residuals: Vec<f64> = nested.iter().zip(&direct).map(|(a, b)| (a - b).abs()).collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(DlrReport {
        eta1: eta1.indices().to_vec(),
        eta2: eta2.indices().to_vec(),
        grid: *grid,
        observables: observables.iter().map(|o| o.name().to_string()).collect(),
        nested,
        direct,
        residuals,
        max_residual,
    })
}
