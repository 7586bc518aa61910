use serde::{Deserialize, Serialize};

use super::QuadratureGrid;
use crate::error::{Error, Result};
use crate::spin::SinglePotential;
use crate::stats::CompensatedSum;

/// Metropolis chain on a finite grid: `P_ij = q_ij min(1, π_j/π_i)` for
/// `i != j` with the symmetric proposal `q_ij = K(u_i - u_j) / C`, where `K`
/// is a Gaussian bump and `C` the largest off-diagonal row sum of `K`.
#[derive(Debug, Clone)]
pub struct DiscreteMetropolis {
    pub nodes: Vec<f64>,
    pub target: Vec<f64>,
    /// Row-major `G x G`.
    pub matrix: Vec<f64>,
}

pub fn discretized_metropolis(nodes: &[f64], target: &[f64], proposal_sd: f64) -> Result<DiscreteMetropolis> {
    let g = nodes.len();
    if target.len() != g {
        return Err(Error::DimensionMismatch {
            expected: g,
            found: target.len(),
            context: "target weights",
        });
    }
    if target.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Domain("target weights must be positive and finite".into()));
    }
    if !(proposal_sd > 0.0) {
        return Err(Error::param("proposal_sd", "must be positive"));
    }
    let mut total = CompensatedSum::default();
    target.iter().for_each(|&t| total.add(t));
    let pi: Vec<f64> = target.iter().map(|t| t / total.value()).collect();

    let bump = |d: f64| (-0.5 * (d / proposal_sd).powi(2)).exp();
    let c = (0..g)
        .map(|i| (0..g).filter(|&j| j != i).map(|j| bump(nodes[i] - nodes[j])).sum::<f64>())
        .fold(0.0, f64::max);
    let mut matrix = vec![0.0; g * g];
    for i in 0..g {
        let mut off = CompensatedSum::default();
        for j in (0..g).filter(|&j| j != i) {
            let q = bump(nodes[i] - nodes[j]) / c;
            let p = q * (pi[j] / pi[i]).min(1.0);
            matrix[i * g + j] = p;
            off.add(p);
        }
        matrix[i * g + i] = 1.0 - off.value();
    }
    Ok(DiscreteMetropolis {
        nodes: nodes.to_vec(),
        target: pi,
        matrix,
    })
}

impl DiscreteMetropolis {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.size() + j]
    }

    /// `max_ij |π_i P_ij - π_j P_ji|`.
    pub fn balance_violation(&self) -> f64 {
        let g = self.size();
        let mut worst: f64 = 0.0;
        for i in 0..g {
            for j in i + 1..g {
                let v = self.target[i] * self.entry(i, j) - self.target[j] * self.entry(j, i);
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    /// `max_j |(πP)_j - π_j|`.
    pub fn stationarity_residual(&self) -> f64 {
        let g = self.size();
        (0..g)
            .map(|j| {
                let mut s = CompensatedSum::default();
                for i in 0..g {
                    s.add(self.target[i] * self.entry(i, j));
                }
                (s.value() - self.target[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn row_sum_error(&self) -> f64 {
        let g = self.size();
        (0..g)
            .map(|i| {
                let mut s = CompensatedSum::default();
                self.matrix[i * g..(i + 1) * g].iter().for_each(|&p| s.add(p));
                (s.value() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let g = self.size();
        (0..g).all(|i| (0..g).all(|j| (self.entry(i, j) - self.entry(j, i)).abs() <= tol))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub size: usize,
    pub proposal_sd: f64,
    pub max_violation: f64,
    pub stationarity_residual: f64,
    pub row_sum_error: f64,
}

impl BalanceReport {
    pub fn of(chain: &DiscreteMetropolis, proposal_sd: f64) -> Self {
        Self {
            size: chain.size(),
            proposal_sd,
            max_violation: chain.balance_violation(),
            stationarity_residual: chain.stationarity_residual(),
            row_sum_error: chain.row_sum_error(),
        }
    }
}

/// Discretizes the one-site chain for `π ∝ exp(-scale V)` on the grid nodes
/// and measures detailed balance, stationarity and row sums.
pub fn detailed_balance_check(
    single: &SinglePotential,
    scale: f64,
    grid: &QuadratureGrid,
    proposal_sd: f64,
) -> Result<BalanceReport> {
    if single.spin_dim != 1 {
        return Err(Error::Domain("detailed balance check is one-dimensional".into()));
    }
    let nodes = grid.points();
    let target: Vec<f64> = nodes.iter().map(|&u| (-scale * single.value(&[u])).exp()).collect();
    let chain = discretized_metropolis(&nodes, &target, proposal_sd)?;
    Ok(BalanceReport::of(&chain, proposal_sd))
}
