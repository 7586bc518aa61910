//! Random configurations in finite windows and estimation of their low-order
//! correlation functions.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::{format_f64, parse_f64, NumberFormat};
use crate::rng::{stream, StreamRng};
use crate::spatial::CellList;
use crate::window::{distance, Configuration, Provenance, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Poisson,
    MaternHardcore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    /// Points per unit volume (for Matérn: intensity of the proposal process).
    pub intensity: f64,
    #[serde(default)]
    pub hardcore_radius: f64,
}

impl ProcessSpec {
    pub fn poisson(intensity: f64) -> Self {
        Self {
            kind: ProcessKind::Poisson,
            intensity,
            hardcore_radius: 0.0,
        }
    }

    pub fn matern(intensity: f64, hardcore_radius: f64) -> Self {
        Self {
            kind: ProcessKind::MaternHardcore,
            intensity,
            hardcore_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return Err(Error::param("intensity", format!("must be > 0, got {}", self.intensity)));
        }
        if self.kind == ProcessKind::MaternHardcore
            && !(self.hardcore_radius > 0.0 && self.hardcore_radius.is_finite())
        {
            return Err(Error::param(
                "hardcore_radius",
                format!("must be > 0, got {}", self.hardcore_radius),
            ));
        }
        Ok(())
    }

    pub fn sample(&self, window: &Window, seed: u64) -> Result<Configuration> {
        match self.kind {
            ProcessKind::Poisson => sample_poisson(window, self.intensity, seed),
            ProcessKind::MaternHardcore => {
                sample_matern_hardcore(window, self.intensity, self.hardcore_radius, seed)
            }
        }
    }

    pub(crate) fn to_text(&self, fmt: NumberFormat) -> String {
        let kind = match self.kind {
            ProcessKind::Poisson => "poisson",
            ProcessKind::MaternHardcore => "matern_hardcore",
        };
        format!(
            "{kind} {} {}",
            format_f64(self.intensity, fmt),
            format_f64(self.hardcore_radius, fmt)
        )
    }

    pub(crate) fn from_text(s: &str) -> Option<Self> {
        let mut it = s.split_whitespace();
        let kind = match it.next()? {
            "poisson" => ProcessKind::Poisson,
            "matern_hardcore" => ProcessKind::MaternHardcore,
            _ => return None,
        };
        Some(Self {
            kind,
            intensity: parse_f64(it.next()?)?,
            hardcore_radius: parse_f64(it.next()?)?,
        })
    }
}

fn uniform_points(window: &Window, count: usize, rng: &mut StreamRng) -> Vec<f64> {
    let b = &window.bounds;
    let mut coords = Vec::with_capacity(count * b.dim());
    for _ in 0..count {
        for k in 0..b.dim() {
            coords.push(rng.random_range(b.lower[k]..b.upper[k]));
        }
    }
    coords
}

fn poisson_count(mean: f64, rng: &mut StreamRng) -> Result<usize> {
    let law = Poisson::new(mean).map_err(|e| Error::param("intensity", e.to_string()))?;
    Ok(law.sample(rng) as usize)
}

/// Homogeneous Poisson process of intensity `z` restricted to `window`.
pub fn sample_poisson(window: &Window, z: f64, seed: u64) -> Result<Configuration> {
    ProcessSpec::poisson(z).validate()?;
    let mut rng = stream(seed);
    let count = poisson_count(z * window.volume(), &mut rng)?;
    let coords = uniform_points(window, count, &mut rng);
    Configuration::new(
        window.clone(),
        coords,
        Provenance {
            sampler: "poisson".into(),
            seed,
            process: Some(ProcessSpec::poisson(z)),
        },
    )
}

/// Matérn type-II hardcore thinning of a Poisson(`z`) proposal.
///
/// A proposal point survives iff no other proposal point within distance `d`
/// carries a smaller mark (ties broken by proposal index), so survivors are
/// pairwise more than `d` apart.
pub fn sample_matern_hardcore(window: &Window, z: f64, d: f64, seed: u64) -> Result<Configuration> {
    ProcessSpec::matern(z, d).validate()?;
    let mut rng = stream(seed);
    let count = poisson_count(z * window.volume(), &mut rng)?;
    let proposal = uniform_points(window, count, &mut rng);
    let marks: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
    let dim = window.dim();
    let cells = CellList::new(&proposal, &window.bounds, d);
    let mut coords = Vec::new();
    for i in 0..count {
        let p = &proposal[i * dim..(i + 1) * dim];
        let mut survives = true;
        cells.for_each_candidate(p, |j| {
            if j != i
                && survives
                && (marks[j], j) < (marks[i], i)
                && distance(p, &proposal[j * dim..(j + 1) * dim]) <= d
            {
                survives = false;
            }
        });
        if survives {
            coords.extend_from_slice(p);
        }
    }
    Configuration::new(
        window.clone(),
        coords,
        Provenance {
            sampler: "matern_hardcore".into(),
            seed,
            process: Some(ProcessSpec::matern(z, d)),
        },
    )
}

/// Regular grid of (possibly clipped) cells covering a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub cell_size: f64,
    pub cells_per_axis: Vec<usize>,
    pub cell_volumes: Vec<f64>,
}

impl CellGrid {
    pub fn new(window: &Window, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::param("cell_size", "must be positive"));
        }
        let b = &window.bounds;
        let cells_per_axis: Vec<usize> = (0..b.dim())
            .map(|k| {
                let ratio = b.side(k) / cell_size;
                let near = ratio.round();
                if (ratio - near).abs() < 1e-9 * ratio.max(1.0) {
                    (near as usize).max(1)
                } else {
                    ratio.ceil() as usize
                }
            })
            .collect();
        let total: usize = cells_per_axis.iter().product();
        if total > 1 << 16 {
            return Err(Error::param("cell_size", format!("{total} cells is too many")));
        }
        let mut cell_volumes = Vec::with_capacity(total);
        for c in 0..total {
            let mut rem = c;
            let mut vol = 1.0;
            for k in 0..b.dim() {
                let i = rem % cells_per_axis[k];
                rem /= cells_per_axis[k];
                let lo = b.lower[k] + i as f64 * cell_size;
                let hi = if i + 1 == cells_per_axis[k] {
                    b.upper[k]
                } else {
                    (lo + cell_size).min(b.upper[k])
                };
                vol *= hi - lo;
            }
            cell_volumes.push(vol);
        }
        Ok(Self {
            cell_size,
            cells_per_axis,
            cell_volumes,
        })
    }

    pub fn len(&self) -> usize {
        self.cell_volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_volumes.is_empty()
    }

    pub fn cell_of(&self, window: &Window, x: &[f64]) -> usize {
        let b = &window.bounds;
        let mut idx = 0;
        for k in (0..b.dim()).rev() {
            let i = ((x[k] - b.lower[k]) / self.cell_size).floor().max(0.0) as usize;
            idx = idx * self.cells_per_axis[k] + i.min(self.cells_per_axis[k] - 1);
        }
        idx
    }

    pub fn counts(&self, config: &Configuration) -> Vec<u64> {
        let mut counts = vec![0u64; self.len()];
        for p in config.points() {
            counts[self.cell_of(config.window(), p)] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    /// One cell index for `m = 1`, an ordered pair `a <= b` for `m = 2`.
    pub cells: Vec<usize>,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub order: usize,
    pub grid: CellGrid,
    pub entries: Vec<CorrelationCell>,
    pub sup: f64,
    pub sup_std_error: f64,
    pub sample_count: usize,
}

impl CorrelationEstimate {
    pub fn off_diagonal(&self) -> impl Iterator<Item = &CorrelationCell> {
        self.entries
            .iter()
            .filter(|e| e.cells.len() == 2 && e.cells[0] != e.cells[1])
    }

    pub fn diagonal(&self) -> impl Iterator<Item = &CorrelationCell> {
        self.entries
            .iter()
            .filter(|e| e.cells.len() == 2 && e.cells[0] == e.cells[1])
    }
}

/// Cell-averaged estimate of the `m`-th correlation function.
///
/// For `m = 1` cell `c` gets `E N_c / |c|`. For `m = 2` the pair `(a, b)`
/// gets `E[N_a N_b] / (|a||b|)` off the diagonal and `E[N_a (N_a - 1)] / |a|^2`
/// on it, i.e. ordered pairs of distinct points.
pub fn estimate_correlation(
    samples: &[Configuration],
    m: usize,
    cell_size: f64,
) -> Result<CorrelationEstimate> {
    let first = samples
        .first()
        .ok_or_else(|| Error::param("samples", "at least one configuration is required"))?;
    if !(1..=2).contains(&m) {
        return Err(Error::param("m", format!("only orders 1 and 2 are supported, got {m}")));
    }
    let window = first.window();
    if samples.iter().any(|s| s.window() != window) {
        return Err(Error::Domain("samples come from different windows".into()));
    }
    let grid = CellGrid::new(window, cell_size)?;
    let counts: Vec<Vec<u64>> = samples.iter().map(|s| grid.counts(s)).collect();
    let n = samples.len() as f64;

    let summarize = |values: &mut dyn Iterator<Item = f64>, scale: f64| -> (f64, f64) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in values {
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n;
        let var = if n > 1.0 {
            ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean / scale, (var / n).sqrt() / scale)
    };

    let mut entries = Vec::new();
    if m == 1 {
        for c in 0..grid.len() {
            let (value, std_error) =
                summarize(&mut counts.iter().map(|k| k[c] as f64), grid.cell_volumes[c]);
            entries.push(CorrelationCell {
                cells: vec![c],
                value,
                std_error,
            });
        }
    } else {
        for a in 0..grid.len() {
            for b in a..grid.len() {
                let scale = grid.cell_volumes[a] * grid.cell_volumes[b];
                let mut it = counts.iter().map(|k| {
                    let (na, nb) = (k[a] as f64, k[b] as f64);
                    if a == b {
                        na * (na - 1.0)
                    } else {
                        na * nb
                    }
                });
                let (value, std_error) = summarize(&mut it, scale);
                entries.push(CorrelationCell {
                    cells: vec![a, b],
                    value,
                    std_error,
                });
            }
        }
    }
    let best = entries
        .iter()
        .max_by(|x, y| x.value.total_cmp(&y.value))
        .expect("grid has at least one cell");
    Ok(CorrelationEstimate {
        order: m,
        sup: best.value,
        sup_std_error: best.std_error,
        grid,
        entries,
        sample_count: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Window {
        Window::cube(2, 0.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(sample_poisson(&unit_square(), 0.0, 1).is_err());
        assert!(sample_poisson(&unit_square(), -1.0, 1).is_err());
        assert!(sample_matern_hardcore(&unit_square(), 1.0, 0.0, 1).is_err());
        assert!(estimate_correlation(&[], 1, 0.5).is_err());
        let c = sample_poisson(&unit_square(), 5.0, 1).unwrap();
        assert!(estimate_correlation(std::slice::from_ref(&c), 3, 0.5).is_err());
        let other = sample_poisson(&Window::cube(2, 0.0, 2.0).unwrap(), 5.0, 1).unwrap();
        assert!(estimate_correlation(&[c, other], 1, 0.5).is_err());
    }

    #[test]
    fn poisson_is_deterministic_given_seed() {
        let w = Window::cube(2, 0.0, 5.0).unwrap();
        assert_eq!(sample_poisson(&w, 1.0, 9).unwrap(), sample_poisson(&w, 1.0, 9).unwrap());
        assert_ne!(sample_poisson(&w, 1.0, 9).unwrap(), sample_poisson(&w, 1.0, 10).unwrap());
    }

    #[test]
    fn empty_count_probability() {
        // P(N = 0) = e^{-0.1} for z = 0.1 on the unit square.
        let w = unit_square();
        let draws = 20_000;
        let zeros = (0..draws)
            .filter(|&s| sample_poisson(&w, 0.1, s).unwrap().is_empty())
            .count() as f64;
        let expected = (-0.1f64).exp();
        let se = (expected * (1.0 - expected) / draws as f64).sqrt();
        assert!((zeros / draws as f64 - expected).abs() < 4.0 * se);
    }

    #[test]
    fn single_point_concentrates_in_one_cell() {
        let w = unit_square();
        let c = Configuration::from_points(w.clone(), &[vec![0.1, 0.1]]).unwrap();
        let est = estimate_correlation(&[c.clone(), c], 1, 0.5).unwrap();
        let values: Vec<f64> = est.entries.iter().map(|e| e.value).collect();
        assert_eq!(values, vec![4.0, 0.0, 0.0, 0.0]);
        assert_eq!(est.sup, 4.0);
    }

    #[test]
    fn clipped_last_cell() {
        let w = Window::new(vec![0.0], vec![1.0]).unwrap();
        let g = CellGrid::new(&w, 0.4).unwrap();
        assert_eq!(g.cells_per_axis, vec![3]);
        approx::assert_abs_diff_eq!(g.cell_volumes[2], 0.2, epsilon = 1e-12);
        let g = CellGrid::new(&w, 0.25).unwrap();
        assert_eq!(g.cells_per_axis, vec![4]);
    }

    #[test]
    fn matern_min_distance() {
        let w = Window::cube(2, 0.0, 8.0).unwrap();
        for seed in 0..20 {
            let c = sample_matern_hardcore(&w, 2.0, 0.5, seed).unwrap();
            for i in 0..c.len() {
                for j in 0..i {
                    assert!(distance(c.point(i), c.point(j)) > 0.5);
                }
            }
        }
    }
}
