//! Statistical plumbing: summaries, Monte Carlo standard errors, the
//! Mann–Kendall trend test, nonnegative least squares, tail-index screening
//! and a Poisson goodness-of-fit test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two values).
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Standard error of the mean for independent draws.
pub fn iid_std_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Batch-means standard error for an autocorrelated chain: `floor(sqrt(n))`
/// batches of equal length, trailing remainder dropped.
pub fn batch_means_std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 16 {
        return iid_std_error(xs);
    }
    let batches = (n as f64).sqrt().floor() as usize;
    let size = n / batches;
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(batches)
        .map(mean)
        .collect();
    iid_std_error(&means)
}

/// Inverse of the effective sample size ratio from batch means:
/// `n * SE_batch^2 / Var`.
pub fn integrated_autocorrelation(xs: &[f64]) -> f64 {
    let v = variance(xs);
    if v == 0.0 {
        return 1.0;
    }
    let se = batch_means_std_error(xs);
    (xs.len() as f64 * se * se / v).max(1.0)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl SampleSummary {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        let mean_v = mean(&values);
        let var = variance(&values);
        let count = values.len();
        values.sort_by(f64::total_cmp);
        Self {
            count,
            mean: mean_v,
            variance: var,
            std_error: if count == 0 { f64::NAN } else { (var / count as f64).sqrt() },
            q50: quantile_sorted(&values, 0.5),
            q90: quantile_sorted(&values, 0.9),
            q99: quantile_sorted(&values, 0.99),
            max: values.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannKendall {
    pub n: usize,
    pub s: i64,
    pub variance: f64,
    pub z: f64,
    /// One-sided p-value against the alternative of an increasing trend.
    pub p_increasing: f64,
}

pub fn mann_kendall(xs: &[f64]) -> MannKendall {
    let n = xs.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += match xs[j].partial_cmp(&xs[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j + 1;
    }
    let nf = n as f64;
    let variance = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;
    let z = if variance <= 0.0 {
        0.0
    } else if s > 0 {
        (s as f64 - 1.0) / variance.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / variance.sqrt()
    } else {
        0.0
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    MannKendall {
        n,
        s,
        variance,
        z,
        p_increasing: 1.0 - normal.cdf(z),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnlsFit {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub r_squared: f64,
}

fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])]);
    sub.svd(true, true)
        .solve(y, 1e-12)
        .expect("SVD computed with both factors")
}

/// Lawson–Hanson active-set solution of `min |A x - y|` subject to `x >= 0`.
/// `rows[i]` is the i-th row of `A`.
pub fn nnls(rows: &[Vec<f64>], y: &[f64]) -> NnlsFit {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    assert_eq!(n, y.len(), "row count must match response length");
    let a = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0)
        * b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale * (n.max(p) as f64);
    let mut x = DVector::zeros(p);
    let mut passive = vec![false; p];
    for _ in 0..(3 * p + 10) {
        let grad = a.transpose() * (&b - &a * &x);
        let candidate = (0..p)
            .filter(|&j| !passive[j] && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(t) = candidate else { break };
        passive[t] = true;
        loop {
            let cols: Vec<usize> = (0..p).filter(|&j| passive[j]).collect();
            let sol = least_squares(&a, &b, &cols);
            let mut s = DVector::zeros(p);
            for (k, &j) in cols.iter().enumerate() {
                s[j] = sol[k];
            }
            if cols.iter().all(|&j| s[j] > 0.0) {
                x = s;
                break;
            }
            let (step, blocking) = cols
                .iter()
                .filter(|&&j| s[j] <= 0.0)
                .map(|&j| (x[j] / (x[j] - s[j]), j))
                .fold((f64::INFINITY, usize::MAX), |acc, v| if v.0 < acc.0 { v } else { acc });
            x = &x + (&s - &x) * step;
            x[blocking] = 0.0;
            for &j in &cols {
                if x[j] <= 0.0 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&f| f) {
                break;
            }
        }
    }
    let coefficients: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let fitted: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(&coefficients).map(|(a, c)| a * c).sum())
        .collect();
    let residual_norm = y
        .iter()
        .zip(&fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    NnlsFit {
        r_squared: r_squared(y, &fitted),
        coefficients,
        residual_norm,
    }
}

/// `1 - SS_res / SS_tot` with a centered total sum of squares.
pub fn r_squared(y: &[f64], fitted: &[f64]) -> f64 {
    let m = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    let ss_res: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { f64::NEG_INFINITY };
    }
    1.0 - ss_res / ss_tot
}

/// Hill estimate of the tail exponent from the largest `k = max(2, n/10)`
/// order statistics. Light tails give large values. `None` when the sample
/// has too few positive values.
pub fn hill_tail_index(xs: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    if v.len() < 10 {
        return None;
    }
    v.sort_by(|a, b| b.total_cmp(a));
    let k = (v.len() / 10).max(2);
    let threshold = v[k];
    let h = v[..k].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    Some(if h > 0.0 { 1.0 / h } else { f64::INFINITY })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of integer counts against Poisson(`mean`).
/// Cells are merged from the upper tail until every expected count is >= 5.
pub fn poisson_goodness_of_fit(counts: &[u64], mean_value: f64) -> ChiSquareTest {
    let n = counts.len() as f64;
    let law = Poisson::new(mean_value).expect("positive Poisson mean");
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut observed = vec![0.0; max + 1];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    // bins: 0..K-1 exact, K = "K or more"
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    let mut k = 0;
    loop {
        let p = law.pmf(k as u64);
        let rest = 1.0 - cum - p;
        if n * p < 5.0 && !bins.is_empty() || n * rest < 5.0 {
            let obs_tail: f64 = observed.iter().skip(k).sum();
            bins.push((obs_tail, n * (1.0 - cum)));
            break;
        }
        bins.push((observed.get(k).copied().unwrap_or(0.0), n * p));
        cum += p;
        k += 1;
    }
    // merge a small leading bin into its neighbour
    while bins.len() > 2 && bins[0].1 < 5.0 {
        let first = bins.remove(0);
        bins[0].0 += first.0;
        bins[0].1 += first.1;
    }
    let statistic = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1).max(1);
    let chi = ChiSquared::new(dof as f64).expect("positive dof");
    ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value: 1.0 - chi.cdf(statistic),
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}
