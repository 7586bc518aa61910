//! Observation windows and finite point configurations.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::{format_f64, parse_f64, NumberFormat};
use crate::point_process::ProcessSpec;

/// Closed axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::param("dimension", "must be positive"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
                context: "box corners",
            });
        }
        for (a, b) in lower.iter().zip(&upper) {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::param(
                    "window",
                    format!("need finite lower < upper on every axis, got [{a}, {b}]"),
                ));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.side(k)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// `self ⊆ other`.
    pub fn is_within(&self, other: &Bounds) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|k| self.lower[k] >= other.lower[k] && self.upper[k] <= other.upper[k])
    }
}

/// Finite box in `R^n` together with the origin used by the weights
/// `w_α(x) = exp(-α|x - origin|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub bounds: Bounds,
    pub origin: Vec<f64>,
}

impl Window {
    /// Window with the origin at its center.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let bounds = Bounds::new(lower, upper)?;
        let origin = bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Ok(Self { bounds, origin })
    }

    pub fn with_origin(lower: Vec<f64>, upper: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        let bounds = Bounds::new(lower, upper)?;
        if origin.len() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                found: origin.len(),
                context: "window origin",
            });
        }
        if !bounds.contains(&origin) {
            return Err(Error::param("origin", "must lie inside the window"));
        }
        Ok(Self { bounds, origin })
    }

    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.volume()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds.contains(x)
    }

    /// Euclidean distance from the window origin.
    pub fn radius_of(&self, x: &[f64]) -> f64 {
        distance(x, &self.origin)
    }
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sampler: String,
    pub seed: u64,
    pub process: Option<ProcessSpec>,
}

impl Provenance {
    pub fn manual() -> Self {
        Self {
            sampler: "manual".into(),
            seed: 0,
            process: None,
        }
    }
}

/// Simple finite point configuration inside a window.
///
/// Coordinates are stored row-major: point `i` occupies
/// `coords[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    window: Window,
    coords: Vec<f64>,
    provenance: Provenance,
}

impl Configuration {
    /// Validates that every point lies in the window and that points are
    /// pairwise distinct.
    pub fn new(window: Window, coords: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let dim = window.dim();
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
                context: "flat coordinate buffer length",
            });
        }
        for (i, p) in coords.chunks_exact(dim).enumerate() {
            if !window.contains(p) {
                return Err(Error::Domain(format!("point {i} {p:?} lies outside the window")));
            }
        }
        let mut order: Vec<&[f64]> = coords.chunks_exact(dim).collect();
        order.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if order.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("configuration has repeated points".into()));
        }
        Ok(Self {
            window,
            coords,
            provenance,
        })
    }

    pub fn from_points(window: Window, points: &[Vec<f64>]) -> Result<Self> {
        let dim = window.dim();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
                context: "point coordinates",
            });
        }
        let coords = points.iter().flatten().copied().collect();
        Self::new(window, coords, Provenance::manual())
    }

    pub fn empty(window: Window) -> Self {
        Self {
            window,
            coords: Vec::new(),
            provenance: Provenance::manual(),
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Distance of point `i` from the window origin.
    pub fn radius(&self, i: usize) -> f64 {
        self.window.radius_of(self.point(i))
    }

    /// Indices of points inside `region`, ascending.
    pub fn indices_in(&self, region: &Bounds) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| region.contains(self.point(i)))
            .collect()
    }

    pub fn write_text<W: Write>(&self, mut out: W, fmt: NumberFormat) -> Result<()> {
        let mut s = String::new();
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format_f64(*x, fmt))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(s, "# qgibbs configuration").unwrap();
        writeln!(s, "version 1").unwrap();
        writeln!(s, "dimension {}", self.dim()).unwrap();
        writeln!(s, "lower {}", join(&self.window.bounds.lower)).unwrap();
        writeln!(s, "upper {}", join(&self.window.bounds.upper)).unwrap();
        writeln!(s, "origin {}", join(&self.window.origin)).unwrap();
        writeln!(s, "sampler {}", self.provenance.sampler).unwrap();
        writeln!(s, "seed {}", self.provenance.seed).unwrap();
        match &self.provenance.process {
            Some(p) => writeln!(s, "process {}", p.to_text(fmt)).unwrap(),
            None => writeln!(s, "process none").unwrap(),
        }
        writeln!(s, "points {}", self.len()).unwrap();
        for p in self.points() {
            writeln!(s, "{}", join(p)).unwrap();
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim_start().starts_with('#')));
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("missing `{key}`")))?;
            let line = line?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| Error::parse(no, format!("expected `{key}`")))?;
            Ok((no, rest.trim().to_string()))
        };
        let (no, version) = field("version")?;
        if version != "1" {
            return Err(Error::parse(no, format!("unsupported version {version}")));
        }
        let (no, dim) = field("dimension")?;
        let dim: usize = dim
            .parse()
            .map_err(|_| Error::parse(no, "bad dimension"))?;
        let vec_field = |(no, s): (usize, String)| -> Result<Vec<f64>> {
            let v = parse_row(&s).ok_or_else(|| Error::parse(no, "bad number"))?;
            if v.len() != dim {
                return Err(Error::parse(no, format!("expected {dim} values, got {}", v.len())));
            }
            Ok(v)
        };
        let lower = vec_field(field("lower")?)?;
        let upper = vec_field(field("upper")?)?;
        let origin = vec_field(field("origin")?)?;
        let (_, sampler) = field("sampler")?;
        let (no, seed) = field("seed")?;
        let seed = seed.parse().map_err(|_| Error::parse(no, "bad seed"))?;
        let (no, process) = field("process")?;
        let process = if process == "none" {
            None
        } else {
            Some(ProcessSpec::from_text(&process).ok_or_else(|| Error::parse(no, "bad process"))?)
        };
        let (no, count) = field("points")?;
        let count: usize = count.parse().map_err(|_| Error::parse(no, "bad point count"))?;
        let mut coords = Vec::with_capacity(count * dim);
        for _ in 0..count {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, "truncated point list"))?;
            let row = parse_row(&line?).ok_or_else(|| Error::parse(no, "bad coordinate"))?;
            if row.len() != dim {
                return Err(Error::parse(no, format!("expected {dim} coordinates")));
            }
            coords.extend(row);
        }
        let window = Window::with_origin(lower, upper, origin)?;
        Configuration::new(
            window,
            coords,
            Provenance {
                sampler,
                seed,
                process,
            },
        )
    }
}

pub(crate) fn parse_row(s: &str) -> Option<Vec<f64>> {
    s.split_whitespace().map(parse_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_rejects_degenerate_boxes() {
        assert!(Window::new(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(Window::new(vec![], vec![]).is_err());
        assert!(Window::with_origin(vec![0.0], vec![1.0], vec![2.0]).is_err());
        let w = Window::cube(2, -1.0, 1.0).unwrap();
        assert_eq!(w.origin, vec![0.0, 0.0]);
        assert_eq!(w.volume(), 4.0);
    }

    #[test]
    fn configuration_invariants() {
        let w = Window::cube(2, 0.0, 1.0).unwrap();
        assert!(Configuration::from_points(w.clone(), &[vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        assert!(Configuration::from_points(w.clone(), &[vec![1.5, 0.5]]).is_err());
        let c = Configuration::from_points(w, &[vec![0.1, 0.2], vec![0.9, 0.9]]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.point(1), &[0.9, 0.9]);
    }

    #[test]
    fn text_round_trip() {
        let w = Window::with_origin(vec![0.0, 0.0], vec![3.0, 1.0], vec![1.0, 0.5]).unwrap();
        let c = Configuration::from_points(w, &[vec![0.1, 1.0 / 3.0], vec![2.9, 0.7]]).unwrap();
        for fmt in [NumberFormat::Decimal, NumberFormat::Hex] {
            let mut buf = Vec::new();
            c.write_text(&mut buf, fmt).unwrap();
            let back = Configuration::read_text(&buf[..]).unwrap();
            assert_eq!(back, c);
        }
    }
}
