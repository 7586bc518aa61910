//! Spin fields, pair and single-site potentials, the relative local energy,
//! the weighted `l^p` norm and the admissible parameter window.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GeometricGraph, WeightParams};
use crate::window::{distance, Bounds, Configuration};

/// Assignment `x -> σ(x) ∈ R^m` over the points of a configuration, stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinField {
    dim: usize,
    values: Vec<f64>,
}

impl SpinField {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("spin_dim", "must be positive"));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len() % dim,
                context: "spin buffer length",
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("spin field has non-finite entries".into()));
        }
        Ok(Self { dim, values })
    }

    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; len * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

pub fn norm_sq(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum()
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `|u|^p` computed from `|u|^2`.
pub fn abs_pow(u: &[f64], p: f64) -> f64 {
    pow_from_sq(norm_sq(u), p)
}

#[inline]
pub(crate) fn pow_from_sq(s2: f64, p: f64) -> f64 {
    if p == 2.0 {
        s2
    } else if p == 4.0 {
        s2 * s2
    } else {
        s2.powf(0.5 * p)
    }
}

/// Subset `η` of the vertex set of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet {
    indices: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl SiteSet {
    pub fn new(total: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.last().is_some_and(|&i| i >= total) {
            return Err(Error::Domain(format!(
                "site index {} outside configuration of {total} points",
                indices.last().unwrap()
            )));
        }
        let mut slot = vec![None; total];
        for (k, &i) in indices.iter().enumerate() {
            slot[i] = Some(k);
        }
        Ok(Self { indices, slot })
    }

    pub fn all(total: usize) -> Self {
        Self::new(total, (0..total).collect()).expect("indices in range")
    }

    /// `γ ∩ region`.
    pub fn in_bounds(config: &Configuration, region: &Bounds) -> Self {
        Self::new(config.len(), config.indices_in(region)).expect("indices in range")
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn total(&self) -> usize {
        self.slot.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.slot.get(i).is_some_and(Option::is_some)
    }

    /// Position of site `i` within `indices()`.
    pub fn slot(&self, i: usize) -> Option<usize> {
        self.slot.get(i).copied().flatten()
    }

    pub fn is_subset_of(&self, other: &SiteSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairForm {
    /// `W = j · uᵀ A v` with a symmetric `m × m` matrix `A`.
    Bilinear { matrix: Vec<Vec<f64>> },
    /// `W = j · Σ_k c_k (u·v)^k`, `k = 1..=K`.
    Polynomial { coefficients: Vec<f64> },
}

/// Finite-range pair potential `W_xy(u, v)` with a constant radial profile
/// `j` on `[0, R]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPotential {
    pub range: f64,
    #[serde(default = "one")]
    pub profile: f64,
    #[serde(flatten)]
    pub form: PairForm,
}

fn one() -> f64 {
    1.0
}

/// Constants of the growth estimate `|W(u,v)| <= I_W (|u|^r + |v|^r) + J_W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub r: f64,
    pub i_w: f64,
    pub j_w: f64,
}

impl GrowthBound {
    pub fn bound(&self, u: &[f64], v: &[f64]) -> f64 {
        self.i_w * (abs_pow(u, self.r) + abs_pow(v, self.r)) + self.j_w
    }
}

impl PairPotential {
    /// Ferromagnetic bilinear coupling: `J > 0` means `W = -J u·v`.
    pub fn ferromagnetic(coupling: f64, range: f64, spin_dim: usize) -> Self {
        let matrix = (0..spin_dim)
            .map(|i| (0..spin_dim).map(|j| if i == j { -coupling } else { 0.0 }).collect())
            .collect();
        Self {
            range,
            profile: 1.0,
            form: PairForm::Bilinear { matrix },
        }
    }

    pub fn zero(range: f64, spin_dim: usize) -> Self {
        Self::ferromagnetic(0.0, range, spin_dim)
    }

    pub fn spin_dim(&self) -> Option<usize> {
        match &self.form {
            PairForm::Bilinear { matrix } => Some(matrix.len()),
            PairForm::Polynomial { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.profile == 0.0
            || match &self.form {
                PairForm::Bilinear { matrix } => matrix.iter().flatten().all(|v| *v == 0.0),
                PairForm::Polynomial { coefficients } => coefficients.iter().all(|v| *v == 0.0),
            }
    }

    fn check_shape(&self) -> Result<()> {
        match &self.form {
            PairForm::Bilinear { matrix } => {
                let m = matrix.len();
                if m == 0 || matrix.iter().any(|row| row.len() != m) {
                    return Err(Error::param("pair.matrix", "must be a non-empty square matrix"));
                }
                for i in 0..m {
                    for j in 0..i {
                        if matrix[i][j] != matrix[j][i] {
                            return Err(Error::param("pair.matrix", "must be symmetric"));
                        }
                    }
                }
            }
            PairForm::Polynomial { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::param("pair.coefficients", "must be non-empty"));
                }
            }
        }
        Ok(())
    }

    pub fn growth(&self) -> GrowthBound {
        let j = self.profile.abs();
        match &self.form {
            PairForm::Bilinear { matrix } => {
                let m = matrix.len();
                let a = DMatrix::from_fn(m, m, |r, c| matrix[r][c]);
                let spectral = SymmetricEigen::new(a)
                    .eigenvalues
                    .iter()
                    .fold(0.0f64, |acc, v| acc.max(v.abs()));
                GrowthBound {
                    r: 2.0,
                    i_w: 0.5 * j * spectral,
                    j_w: 0.0,
                }
            }
            PairForm::Polynomial { coefficients } => {
                let total: f64 = coefficients.iter().map(|c| c.abs()).sum();
                GrowthBound {
                    r: 2.0 * coefficients.len() as f64,
                    i_w: 0.5 * j * total,
                    j_w: j * total,
                }
            }
        }
    }

    /// `W` for two points at distance `d`. Zero beyond the range.
    #[inline]
    pub fn energy_at_distance(&self, d: f64, u: &[f64], v: &[f64]) -> f64 {
        if d > self.range {
            return 0.0;
        }
        match &self.form {
            PairForm::Bilinear { matrix } => {
                let mut s = 0.0;
                for (i, row) in matrix.iter().enumerate() {
                    s += u[i] * dot(row, v);
                }
                self.profile * s
            }
            PairForm::Polynomial { coefficients } => {
                let t = dot(u, v);
                let mut pow = 1.0;
                let mut s = 0.0;
                for c in coefficients {
                    pow *= t;
                    s += c * pow;
                }
                self.profile * s
            }
        }
    }

    pub fn pair_energy(&self, x: &[f64], y: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: v.len(),
                context: "pair_energy spins",
            });
        }
        if let Some(m) = self.spin_dim() {
            if u.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: u.len(),
                    context: "pair_energy spin vs coupling matrix",
                });
            }
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
                context: "pair_energy positions",
            });
        }
        Ok(self.energy_at_distance(distance(x, y), u, v))
    }
}

/// `V(u) = a |u|^q - κ |u|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinglePotential {
    pub a: f64,
    pub q: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "one_usize")]
    pub spin_dim: usize,
}

fn one_usize() -> usize {
    1
}

impl SinglePotential {
    pub fn power(a: f64, q: f64, spin_dim: usize) -> Self {
        Self {
            a,
            q,
            kappa: 0.0,
            spin_dim,
        }
    }

    #[inline]
    pub fn value_from_sq(&self, s2: f64) -> f64 {
        let lead = self.a * pow_from_sq(s2, self.q);
        if self.kappa == 0.0 {
            lead
        } else {
            lead - self.kappa * s2
        }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        self.value_from_sq(norm_sq(u))
    }

    /// `(a_V, b_V)` with `V(u) >= a_V |u|^q - b_V`. Without the quadratic
    /// term this is `(a, 0)`; otherwise half of the leading coefficient is
    /// spent on absorbing `κ|u|^2`:
    /// `b_V = max_t (κ t^2 - (a/2) t^q)`, attained at
    /// `t* = (4κ / (a q))^{1/(q-2)}`.
    pub fn stability(&self) -> (f64, f64) {
        if self.kappa <= 0.0 {
            return (self.a, 0.0);
        }
        let half = 0.5 * self.a;
        if self.q <= 2.0 || half <= 0.0 {
            return (half, f64::INFINITY);
        }
        let t = (2.0 * self.kappa / (half * self.q)).powf(1.0 / (self.q - 2.0));
        (half, self.kappa * t * t - half * t.powf(self.q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tempered {
    pub alpha: f64,
    pub p: f64,
    #[serde(rename = "M")]
    pub m: u32,
}

/// Full model description. Serialized as a TOML document with sections
/// `[pair]`, `[single]` and `[tempered]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Multiplies both `V` and `W` (an inverse temperature).
    #[serde(default = "one")]
    pub scale: f64,
    pub pair: PairPotential,
    pub single: SinglePotential,
    pub tempered: Tempered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub p_prime: f64,
    pub q_threshold: f64,
    pub p_lower: f64,
    pub growth: GrowthBound,
    pub a_v: f64,
    pub b_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<String>,
    pub checks: Vec<Check>,
    pub derived: DerivedConstants,
}

impl ModelParams {
    pub fn spin_dim(&self) -> usize {
        self.single.spin_dim
    }

    /// `p' = 2 / (p - 2)`.
    pub fn p_prime(&self) -> f64 {
        2.0 / (self.tempered.p - 2.0)
    }

    pub fn weights(&self, config: &Configuration) -> Result<WeightParams> {
        WeightParams::new(self.tempered.alpha, config.window())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Manifest {
            field: "model".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn validate(&self) -> ValidityReport {
        let q = self.single.q;
        let p = self.tempered.p;
        let m = f64::from(self.tempered.m);
        let growth = self.pair.growth();
        let (a_v, b_v) = self.single.stability();
        let q_threshold = if q > 2.0 { 2.0 * q / (q - 2.0) } else { f64::INFINITY };
        let p_lower = if m > 2.0 { 2.0 * m / (m - 2.0) } else { f64::INFINITY };
        let mut checks = Vec::new();
        let mut check = |name: &str, holds: bool, detail: String| {
            checks.push(Check {
                name: name.to_string(),
                holds,
                detail,
            });
        };
        check("q > 2", q > 2.0, format!("q = {q}"));
        check(
            "M > 2q/(q-2)",
            q > 2.0 && m > q_threshold,
            format!("M = {m}, 2q/(q-2) = {q_threshold}"),
        );
        check(
            "p >= 2M/(M-2)",
            m > 2.0 && p >= p_lower,
            format!("p = {p}, 2M/(M-2) = {p_lower}"),
        );
        check("p <= q", p <= q, format!("p = {p}, q = {q}"));
        check(
            "r < p",
            growth.r < p,
            format!("growth exponent r = {}, p = {p}", growth.r),
        );
        check(
            "alpha > 0",
            self.tempered.alpha > 0.0 && self.tempered.alpha.is_finite(),
            format!("alpha = {}", self.tempered.alpha),
        );
        check("a_V > 0", a_v > 0.0, format!("a_V = {a_v}"));
        check("b_V finite", b_v.is_finite(), format!("b_V = {b_v}"));
        check(
            "R > 0",
            self.pair.range > 0.0 && self.pair.range.is_finite(),
            format!("R = {}", self.pair.range),
        );
        check(
            "scale > 0",
            self.scale > 0.0 && self.scale.is_finite(),
            format!("scale = {}", self.scale),
        );
        let shape = self.pair.check_shape();
        check(
            "pair potential well-formed",
            shape.is_ok(),
            shape.err().map_or_else(String::new, |e| e.to_string()),
        );
        let dims_ok = self.single.spin_dim > 0
            && self.pair.spin_dim().is_none_or(|d| d == self.single.spin_dim);
        check(
            "spin dimensions agree",
            dims_ok,
            format!(
                "single spin_dim = {}, pair matrix dim = {:?}",
                self.single.spin_dim,
                self.pair.spin_dim()
            ),
        );
        let violations = checks
            .iter()
            .filter(|c| !c.holds)
            .map(|c| format!("{} violated: {}", c.name, c.detail))
            .collect::<Vec<_>>();
        ValidityReport {
            valid: violations.is_empty(),
            violations,
            checks,
            derived: DerivedConstants {
                p_prime: self.p_prime(),
                q_threshold,
                p_lower,
                growth,
                a_v,
                b_v,
            },
        }
    }

    pub fn require_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.valid {
            Ok(())
        } else {
            Err(Error::InvalidModel(report.violations))
        }
    }
}

/// `E_η(σ|ξ)`: pair energy inside `η` plus the interaction of `η` with the
/// boundary values `ξ` on `γ \ η`. `sigma` is indexed like `eta.indices()`,
/// `xi` like the configuration.
pub fn local_energy(
    graph: &GeometricGraph,
    eta: &SiteSet,
    sigma: &SpinField,
    xi: &SpinField,
    pair: &PairPotential,
) -> Result<f64> {
    let config = graph.configuration();
    if eta.total() != config.len() {
        return Err(Error::Domain("volume does not index this configuration".into()));
    }
    if sigma.len() != eta.len() {
        return Err(Error::DimensionMismatch {
            expected: eta.len(),
            found: sigma.len(),
            context: "spins on the volume",
        });
    }
    if xi.len() != config.len() {
        return Err(Error::DimensionMismatch {
            expected: config.len(),
            found: xi.len(),
            context: "boundary field on the configuration",
        });
    }
    if sigma.dim() != xi.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: xi.dim(),
            context: "spin dimension",
        });
    }
    let mut energy = 0.0;
    for (k, &x) in eta.indices().iter().enumerate() {
        let u = sigma.get(k);
        for &y in graph.neighbors(x) {
            let d = distance(config.point(x), config.point(y));
            match eta.slot(y) {
                Some(ky) if y > x => energy += pair.energy_at_distance(d, u, sigma.get(ky)),
                Some(_) => {}
                None => energy += pair.energy_at_distance(d, u, xi.get(y)),
            }
        }
    }
    Ok(energy)
}

/// `‖σ‖_{α,p}^p = Σ_x |σ(x)|^p w_α(x)`.
pub fn tempered_norm_pow(config: &Configuration, sigma: &SpinField, w: &WeightParams, p: f64) -> f64 {
    config
        .points()
        .enumerate()
        .map(|(i, x)| abs_pow(sigma.get(i), p) * w.weight(x))
        .sum()
}

pub fn tempered_norm(config: &Configuration, sigma: &SpinField, w: &WeightParams, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param("p", format!("must be >= 1, got {p}")));
    }
    if sigma.len() != config.len() {
        return Err(Error::DimensionMismatch {
            expected: config.len(),
            found: sigma.len(),
            context: "spin field vs configuration",
        });
    }
    Ok(tempered_norm_pow(config, sigma, w, p).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::Window;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    pub(crate) fn model(q: f64, m: u32, p: f64) -> ModelParams {
        ModelParams {
            scale: 1.0,
            pair: PairPotential::ferromagnetic(0.2, 1.0, 1),
            single: SinglePotential::power(1.0, q, 1),
            tempered: Tempered { alpha: 1.0, p, m },
        }
    }

    #[test]
    fn validate_examples() {
        let r = model(4.0, 6, 3.0).validate();
        assert!(r.valid, "{:?}", r.violations);
        assert_eq!(r.derived.q_threshold, 4.0);
        assert_eq!(r.derived.p_lower, 3.0);
        assert_eq!(r.derived.p_prime, 2.0);

        let r = model(2.0, 6, 2.0).validate();
        assert!(!r.valid);
        assert!(r.violations.iter().any(|v| v.starts_with("q > 2 violated")));

        let r = model(4.0, 4, 3.0).validate();
        assert!(!r.valid);
        assert!(r.violations.iter().any(|v| v.starts_with("M > 2q/(q-2) violated")));
    }

    #[test]
    fn growth_exponent_must_stay_below_p() {
        let mut m = model(6.0, 8, 2.5);
        m.pair.form = PairForm::Polynomial {
            coefficients: vec![0.1, 0.01],
        };
        let r = m.validate();
        assert!(r.violations.iter().any(|v| v.starts_with("r < p")), "{:?}", r.violations);
    }

    #[test]
    fn validity_monotone_in_q() {
        for m in 3..12u32 {
            for pi in 0..40 {
                let p = 2.0 + pi as f64 * 0.25;
                let mut was_valid = false;
                for qi in 0..60 {
                    let q = 2.0 + qi as f64 * 0.25;
                    let valid = model(q, m, p).validate().valid;
                    assert!(!was_valid || valid, "q = {q}, M = {m}, p = {p}");
                    was_valid = valid;
                }
            }
        }
    }

    #[test]
    fn stability_constant_holds_on_grid() {
        let v = SinglePotential {
            a: 1.3,
            q: 4.0,
            kappa: 0.7,
            spin_dim: 1,
        };
        let (a_v, b_v) = v.stability();
        assert!(b_v > 0.0 && b_v.is_finite());
        for i in 0..=4000 {
            let u = -10.0 + i as f64 * 0.005;
            assert!(v.value(&[u]) >= a_v * u.abs().powf(4.0) - b_v - 1e-12);
        }
    }

    #[test]
    fn pair_energy_examples() {
        let w = PairPotential::ferromagnetic(0.5, 1.0, 2);
        let e1 = [1.0, 0.0];
        assert_eq!(w.pair_energy(&[0.0], &[0.9], &e1, &e1).unwrap(), -0.5);
        assert_eq!(w.pair_energy(&[0.0], &[1.1], &e1, &e1).unwrap(), 0.0);
        assert!(w.pair_energy(&[0.0], &[0.5], &[1.0], &e1).is_err());
        let g = w.growth();
        assert_eq!((g.r, g.i_w, g.j_w), (2.0, 0.25, 0.0));
    }

    #[test]
    fn growth_bound_random_draws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let bilinear = PairPotential {
            range: 1.0,
            profile: -0.7,
            form: PairForm::Bilinear {
                matrix: vec![vec![1.0, 0.3, 0.0], vec![0.3, -2.0, 0.5], vec![0.0, 0.5, 0.2]],
            },
        };
        let poly = PairPotential {
            range: 1.0,
            profile: 0.4,
            form: PairForm::Polynomial {
                coefficients: vec![-1.0, 0.5],
            },
        };
        for pot in [bilinear, poly] {
            let g = pot.growth();
            for _ in 0..100_000 {
                let scale = 10f64.powf(rng.random_range(-2.0..2.0));
                let u: Vec<f64> = (0..3).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let e = pot.energy_at_distance(0.5, &u, &v);
                assert!(e.abs() <= g.bound(&u, &v) * (1.0 + 1e-12) + 1e-300);
                // (x,u) <-> (y,v) symmetry
                assert_abs_diff_eq!(e, pot.energy_at_distance(0.5, &v, &u), epsilon = 1e-12 * e.abs().max(1.0));
            }
        }
    }

    fn path() -> (Configuration, GeometricGraph) {
        let w = Window::new(vec![-5.0], vec![5.0]).unwrap();
        let c = Configuration::from_points(w, &[vec![-0.8], vec![0.0], vec![0.8], vec![3.0]]).unwrap();
        let g = GeometricGraph::build(&c, 1.0).unwrap();
        (c, g)
    }

    #[test]
    fn local_energy_examples() {
        let (c, g) = path();
        let pair = PairPotential::ferromagnetic(0.3, 1.0, 1);
        let xi = SpinField::new(1, vec![0.5, -1.0, 2.0, 7.0]).unwrap();
        // η = {middle}: two boundary terms
        let eta = SiteSet::new(c.len(), vec![1]).unwrap();
        let sigma = SpinField::new(1, vec![1.5]).unwrap();
        let e = local_energy(&g, &eta, &sigma, &xi, &pair).unwrap();
        let brute = -0.3 * 1.5 * 0.5 + -0.3 * 1.5 * 2.0;
        assert_abs_diff_eq!(e, brute, epsilon = 1e-15);
        // isolated site: nothing
        let eta = SiteSet::new(c.len(), vec![3]).unwrap();
        assert_eq!(local_energy(&g, &eta, &sigma, &xi, &pair).unwrap(), 0.0);
        // two sites, aligned unit spins
        let eta = SiteSet::new(c.len(), vec![0, 1]).unwrap();
        let sigma = SpinField::new(1, vec![1.0, 1.0]).unwrap();
        let xi0 = SpinField::zeros(4, 1);
        assert_abs_diff_eq!(local_energy(&g, &eta, &sigma, &xi0, &pair).unwrap(), -0.3);
    }

    #[test]
    fn tempered_norm_examples() {
        let w = Window::cube(2, -3.0, 3.0).unwrap();
        let c = Configuration::from_points(w.clone(), &[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let wp = WeightParams::new(0.5, &w).unwrap();
        let zero = SpinField::zeros(2, 2);
        assert_eq!(tempered_norm(&c, &zero, &wp, 3.0).unwrap(), 0.0);
        let s = SpinField::new(2, vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(tempered_norm(&c, &s, &wp, 3.0).unwrap(), 5.0, epsilon = 1e-14);
        let s = SpinField::new(2, vec![0.0, 2.0, 1.0, 0.0]).unwrap();
        let hand = (8.0 + (-0.5 * 2f64.sqrt()).exp()).powf(1.0 / 3.0);
        assert_abs_diff_eq!(tempered_norm(&c, &s, &wp, 3.0).unwrap(), hand, epsilon = 1e-14);
        assert!(tempered_norm(&c, &s, &wp, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn norm_axioms(
            a in proptest::collection::vec(-5.0f64..5.0, 8),
            b in proptest::collection::vec(-5.0f64..5.0, 8),
            c in -4.0f64..4.0,
            alpha in 0.1f64..3.0,
            p in 1.0f64..6.0,
        ) {
            let w = Window::cube(2, -2.0, 2.0).unwrap();
            let cfg = Configuration::from_points(w.clone(), &[
                vec![0.0, 0.0], vec![1.0, 0.5], vec![-1.5, 1.0], vec![0.3, -1.9],
            ]).unwrap();
            let wp = WeightParams::new(alpha, &w).unwrap();
            let sa = SpinField::new(2, a.clone()).unwrap();
            let sb = SpinField::new(2, b.clone()).unwrap();
            let sum = SpinField::new(2, a.iter().zip(&b).map(|(x, y)| x + y).collect()).unwrap();
            let na = tempered_norm(&cfg, &sa, &wp, p).unwrap();
            let nb = tempered_norm(&cfg, &sb, &wp, p).unwrap();
            prop_assert!(tempered_norm(&cfg, &sum, &wp, p).unwrap() <= (na + nb) * (1.0 + 1e-12));
            let scaled = tempered_norm(&cfg, &sa.scaled(c), &wp, p).unwrap();
            prop_assert!((scaled - c.abs() * na).abs() <= 1e-12 * na.max(1.0));
            let heavier = WeightParams::new(alpha * 1.5, &w).unwrap();
            prop_assert!(tempered_norm(&cfg, &sa, &heavier, p).unwrap() <= na);
        }
    }

    #[test]
    fn model_toml_round_trip() {
        let text = r#"
scale = 1.0

[pair]
kind = "bilinear"
range = 1.0
matrix = [[-0.2]]

[single]
a = 1.0
q = 4.0

[tempered]
alpha = 1.0
p = 3.0
M = 6
"#;
        let m = ModelParams::from_toml(text).unwrap();
        assert_eq!(m.pair, PairPotential::ferromagnetic(0.2, 1.0, 1));
        assert!(m.validate().valid);
        assert_eq!(ModelParams::from_toml(&m.to_toml()).unwrap(), m);
    }
}
