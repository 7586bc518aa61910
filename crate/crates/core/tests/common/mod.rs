#![allow(dead_code)]

use qgibbs::spin::Tempered;
use qgibbs::{Configuration, GeometricGraph, ModelParams, PairPotential, SinglePotential, SpinField, Window};

/// `n` points on a horizontal line with unit spacing.
pub fn line(n: usize) -> Configuration {
    let window = Window::cube(2, -5.0, 5.0).unwrap();
    let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 - 1.0, 0.0]).collect();
    Configuration::from_points(window, &pts).unwrap()
}

pub fn line_graph(n: usize) -> GeometricGraph {
    GeometricGraph::build(&line(n), 1.0).unwrap()
}

/// Ferromagnetic `J`, `V = a|u|^q`, unit range, `m = 1`, `(α, p, M) = (1, 3, 6)`.
pub fn model(coupling: f64, a: f64, q: f64) -> ModelParams {
    ModelParams {
        scale: 1.0,
        pair: PairPotential::ferromagnetic(coupling, 1.0, 1),
        single: SinglePotential::power(a, q, 1),
        tempered: Tempered { alpha: 1.0, p: 3.0, m: 6 },
    }
}

pub fn zeros(n: usize) -> SpinField {
    SpinField::zeros(n, 1)
}

/// Composite Simpson rule on `[lo, hi]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        let x = lo + k as f64 * h;
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// All-pairs adjacency at closed radius `r`, neighbours ascending.
pub fn brute_adjacency(config: &Configuration, r: f64) -> Vec<Vec<usize>> {
    let n = config.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d2: f64 = config
                    .point(i)
                    .iter()
                    .zip(config.point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2.sqrt() <= r {
                    adj[i].push(j);
                }
            }
        }
    }
    adj
}

/// Uniform random configuration with up to `max_points` points in `[0, side]^dim`.
pub fn random_configuration(rng: &mut impl rand::Rng, dim: usize, side: f64, max_points: usize) -> Configuration {
    let window = Window::cube(dim, 0.0, side).unwrap();
    let n = rng.random_range(0..=max_points);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..side)).collect())
        .collect();
    Configuration::from_points(window, &pts).unwrap()
}
