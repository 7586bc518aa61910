//! Radius-`R` geometric graph on a configuration and the weighted degree
//! functionals `a_{α,r}`, `b_α` together with the majorant
//! `Σ_x w_α(x) n_{2R}(x)^{M-1}`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_process::ProcessSpec;
use crate::rng::derive_seed;
use crate::spatial::CellList;
use crate::stats::SampleSummary;
use crate::window::{distance, Configuration, Window};

/// Exponential weights `w_α(x) = exp(-α |x - origin|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub alpha: f64,
    pub origin: Vec<f64>,
}

impl WeightParams {
    pub fn new(alpha: f64, window: &Window) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
        }
        Ok(Self {
            alpha,
            origin: window.origin.clone(),
        })
    }

    /// Same origin, different decay rate.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
        }
        Ok(Self {
            alpha,
            origin: self.origin.clone(),
        })
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        (-self.alpha * distance(x, &self.origin)).exp()
    }

    pub fn weights(&self, config: &Configuration) -> Vec<f64> {
        config.points().map(|p| self.weight(p)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GeometricGraph {
    config: Configuration,
    radius: f64,
    adjacency: Vec<Vec<usize>>,
    degree_2r: Vec<usize>,
    cell_edge: Vec<f64>,
}

impl GeometricGraph {
    /// Neighbours are points at Euclidean distance `<= radius` (closed ball).
    pub fn build(config: &Configuration, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", format!("must be > 0, got {radius}")));
        }
        let bounds = &config.window().bounds;
        let near = CellList::new(config.coords(), bounds, radius);
        let far = CellList::new(config.coords(), bounds, 2.0 * radius);
        let n = config.len();
        let mut adjacency = Vec::with_capacity(n);
        let mut degree_2r = Vec::with_capacity(n);
        for i in 0..n {
            let p = config.point(i);
            let mut adj = Vec::new();
            near.for_each_candidate(p, |j| {
                if j != i && distance(p, config.point(j)) <= radius {
                    adj.push(j);
                }
            });
            adj.sort_unstable();
            adjacency.push(adj);
            let mut d2 = 0;
            far.for_each_candidate(p, |j| {
                if j != i && distance(p, config.point(j)) <= 2.0 * radius {
                    d2 += 1;
                }
            });
            degree_2r.push(d2);
        }
        Ok(Self {
            config: config.clone(),
            radius,
            adjacency,
            degree_2r,
            cell_edge: near.cell_width().to_vec(),
        })
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Sorted neighbour indices of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Number of other points within distance `2R` of vertex `i`.
    pub fn degree_2r(&self, i: usize) -> usize {
        self.degree_2r[i]
    }

    pub fn cell_edge(&self) -> &[f64] {
        &self.cell_edge
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Unordered edges `(i, j)` with `i < j`, lexicographically sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// `hist[k]` = number of vertices of degree `k`.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let max = self.adjacency.iter().map(Vec::len).max().unwrap_or(0);
        let mut hist = vec![0; max + 1];
        for adj in &self.adjacency {
            hist[adj.len()] += 1;
        }
        if self.is_empty() {
            hist.clear();
        }
        hist
    }

    pub fn edge_list_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# i j").unwrap();
        for (i, j) in self.edges() {
            writeln!(s, "{i} {j}").unwrap();
        }
        s
    }

    pub fn degree_table_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "index\tdegree_r\tdegree_2r").unwrap();
        for i in 0..self.len() {
            writeln!(s, "{i}\t{}\t{}", self.degree(i), self.degree_2r(i)).unwrap();
        }
        s
    }
}

/// `b_α(γ) = Σ_x w_α(x)`.
pub fn functional_b(config: &Configuration, w: &WeightParams) -> f64 {
    config.points().map(|p| w.weight(p)).sum()
}

fn degree_pow(base: f64, r: f64) -> f64 {
    if r.fract() == 0.0 && r.abs() < i32::MAX as f64 {
        base.powi(r as i32)
    } else {
        base.powf(r)
    }
}

/// `a_{α,r}` in the ordered-pair convention:
/// `Σ_x w_α(x) Σ_{y~x} [n_R(x) n_R(y)]^r`.
pub fn functional_a(graph: &GeometricGraph, w: &WeightParams, r: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::param("r", format!("must be >= 0, got {r}")));
    }
    let config = graph.configuration();
    Ok((0..graph.len())
        .map(|x| {
            let nx = graph.degree(x) as f64;
            let inner: f64 = graph
                .neighbors(x)
                .iter()
                .map(|&y| degree_pow(nx * graph.degree(y) as f64, r))
                .sum();
            w.weight(config.point(x)) * inner
        })
        .sum())
}

/// `Σ_x w_α(x) n_{2R}(x)^{M-1}`, which dominates `a_{α,r}` for `r <= M/2 - 1`.
pub fn majorant(graph: &GeometricGraph, w: &WeightParams, m: u32) -> f64 {
    let config = graph.configuration();
    let e = m.saturating_sub(1) as i32;
    (0..graph.len())
        .map(|x| w.weight(config.point(x)) * (graph.degree_2r(x) as f64).powi(e))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFunctionals {
    pub alpha: f64,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: u32,
    pub a: f64,
    pub b: f64,
    pub majorant: f64,
}

pub fn graph_functionals(graph: &GeometricGraph, w: &WeightParams, r: f64, m: u32) -> Result<GraphFunctionals> {
    Ok(GraphFunctionals {
        alpha: w.alpha,
        r,
        m,
        a: functional_a(graph, w, r)?,
        b: functional_b(graph.configuration(), w),
        majorant: majorant(graph, w, m),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityStudy {
    pub process: ProcessSpec,
    pub radius: f64,
    pub alpha: f64,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: u32,
    /// `r <= M/2 - 1`, the range where `a_{α,r}` is known to be integrable.
    pub hypothesis_holds: bool,
    pub num_samples: usize,
    pub a: SampleSummary,
    pub b: SampleSummary,
    pub majorant: SampleSummary,
    pub points: SampleSummary,
}

/// Monte Carlo moments of `a_{α,r}`, `b_α` and the majorant over draws of
/// the point process in `window`.
#[allow(clippy::too_many_arguments)]
pub fn integrability_study(
    spec: &ProcessSpec,
    window: &Window,
    radius: f64,
    w: &WeightParams,
    r: f64,
    m: u32,
    num_samples: usize,
    seed: u64,
) -> Result<IntegrabilityStudy> {
    if num_samples == 0 {
        return Err(Error::param("num_samples", "must be >= 1"));
    }
    spec.validate()?;
    let rows: Vec<[f64; 4]> = (0..num_samples)
        .into_par_iter()
        .map(|k| {
            let config = spec.sample(window, derive_seed(seed, k as u64))?;
            let graph = GeometricGraph::build(&config, radius)?;
            let f = graph_functionals(&graph, w, r, m)?;
            Ok([f.a, f.b, f.majorant, config.len() as f64])
        })
        .collect::<Result<_>>()?;
    let column = |c: usize| SampleSummary::from_values(rows.iter().map(|row| row[c]).collect());
    Ok(IntegrabilityStudy {
        process: spec.clone(),
        radius,
        alpha: w.alpha,
        r,
        m,
        hypothesis_holds: r <= f64::from(m) / 2.0 - 1.0,
        num_samples,
        a: column(0),
        b: column(1),
        majorant: column(2),
        points: column(3),
    })
}
