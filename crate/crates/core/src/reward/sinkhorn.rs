use alloc::vec;
use alloc::vec::Vec;

use super::cost::CostMatrix;
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    /// Entropic weight ε.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once every row and column sum is within this of `1/T`.
    pub tolerance: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { epsilon: 0.05, max_iters: 200, tolerance: 1e-6 }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config("sinkhorn epsilon must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("sinkhorn max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Non-negative `T × T` transport plan with marginals `1/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    size: usize,
    data: Vec<f64>,
}

impl CouplingPlan {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest deviation of any row or column sum from `1/T`.
    pub fn marginal_error(&self) -> f64 {
        let n = self.size;
        let target = 1.0 / n as f64;
        let mut err: f64 = 0.0;
        for i in 0..n {
            let r: f64 = self.row(i).iter().sum();
            let c: f64 = (0..n).map(|k| self.at(k, i)).sum();
            err = err.max((r - target).abs()).max((c - target).abs());
        }
        err
    }

    /// `Σ C·μ`.
    pub fn transport_cost(&self, cost: &CostMatrix) -> f64 {
        self.data.iter().zip(cost.data()).map(|(p, c)| p * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutcome {
    pub plan: CouplingPlan,
    pub iterations: usize,
    /// `false` when `max_iters` ran out first; `marginal_error` then reports
    /// what was achieved.
    pub converged: bool,
    pub marginal_error: f64,
}

/// Log-domain Sinkhorn for uniform marginals.
///
/// Dual potentials `f`, `g` are updated alternately,
/// `f_i = ε log(1/T) − ε LSE_j((g_j − C_ij)/ε)` and symmetrically for `g`;
/// the plan is `exp((f_i + g_j − C_ij)/ε)`.
pub fn sinkhorn(cost: &CostMatrix, cfg: &SinkhornConfig) -> Result<SinkhornOutcome> {
    cfg.validate()?;
    if cost.rows() != cost.cols() {
        return Err(Error::contract("sinkhorn expects a square cost matrix"));
    }
    if cost.data().iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::contract("cost matrix must be finite and non-negative"));
    }
    let n = cost.rows();
    let eps = cfg.epsilon;
    let log_marginal = -math::ln(n as f64);
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        for i in 0..n {
            for j in 0..n {
                scratch[j] = (g[j] - cost.at(i, j)) / eps;
            }
            f[i] = eps * log_marginal - eps * math::log_sum_exp(&scratch);
        }
        for j in 0..n {
            for i in 0..n {
                scratch[i] = (f[i] - cost.at(i, j)) / eps;
            }
            g[j] = eps * log_marginal - eps * math::log_sum_exp(&scratch);
        }
        if f.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Sinkhorn potential; raise epsilon".into()));
        }
        // columns are exact after the g update; rows carry the residual
        let target = 1.0 / n as f64;
        let mut row_err: f64 = 0.0;
        for i in 0..n {
            let s: f64 = (0..n).map(|j| math::exp((f[i] + g[j] - cost.at(i, j)) / eps)).sum();
            row_err = row_err.max((s - target).abs());
        }
        if row_err < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = math::exp((f[i] + g[j] - cost.at(i, j)) / eps);
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite transport plan".into()));
    }
    let plan = CouplingPlan { size: n, data };
    let marginal_error = plan.marginal_error();
    Ok(SinkhornOutcome { plan, iterations, converged, marginal_error })
}
