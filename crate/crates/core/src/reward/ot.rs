use alloc::vec::Vec;

use super::cost::{cost_matrix, CostFunction};
use super::sinkhorn::{sinkhorn, SinkhornConfig, SinkhornOutcome};
use crate::repr::EmbeddingSequence;
use crate::{Error, Result};

/// Per-step trajectory-matching rewards and the solve that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct OtRewards {
    pub rewards: Vec<f64>,
    /// `Σ C·μ`, equal to `−Σ rewards`.
    pub transport_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub marginal_error: f64,
}

/// `R1[t] = −Σ_{t'} C[t][t']·μ[t][t']` under the entropic plan.
pub fn ot_rewards(
    behavior: &EmbeddingSequence,
    expert: &EmbeddingSequence,
    cost: CostFunction,
    cfg: &SinkhornConfig,
) -> Result<OtRewards> {
    let c = cost_matrix(behavior, expert, cost)?;
    let SinkhornOutcome { plan, iterations, converged, marginal_error } = sinkhorn(&c, cfg)?;
    let rewards: Vec<f64> = (0..c.rows())
        .map(|t| -c.row(t).iter().zip(plan.row(t)).map(|(c, m)| c * m).sum::<f64>())
        .collect();
    Ok(OtRewards {
        transport_cost: plan.transport_cost(&c),
        rewards,
        iterations,
        converged,
        marginal_error,
    })
}

/// Solves against every expert and keeps the cheapest; ties go to the lowest
/// index.
pub fn nearest_expert(
    behavior: &EmbeddingSequence,
    experts: &[EmbeddingSequence],
    cost: CostFunction,
    cfg: &SinkhornConfig,
) -> Result<(usize, OtRewards)> {
    let mut best: Option<(usize, OtRewards)> = None;
    for (i, e) in experts.iter().enumerate() {
        let r = ot_rewards(behavior, e, cost, cfg)?;
        let better = match &best {
            None => true,
            Some((_, b)) => r.transport_cost < b.transport_cost,
        };
        if better {
            best = Some((i, r));
        }
    }
    best.ok_or_else(|| Error::contract("nearest_expert needs a non-empty expert set"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[[f64; 2]]) -> EmbeddingSequence {
        EmbeddingSequence::from_rows(rows).unwrap()
    }

    #[test]
    fn sum_identity_and_sign() {
        let a = seq(&[[1.0, 0.2], [0.3, -0.7], [-0.5, 0.5]]);
        let b = seq(&[[0.9, 0.1], [-0.2, -0.8], [0.1, 0.9]]);
        let r = ot_rewards(&a, &b, CostFunction::Cosine, &SinkhornConfig::default()).unwrap();
        assert!(r.rewards.iter().all(|&x| x <= 0.0));
        let s: f64 = r.rewards.iter().sum();
        assert!((s + r.transport_cost).abs() < 1e-10);
    }

    #[test]
    fn picks_the_identical_trajectory() {
        let a = seq(&[[1.0, 0.0], [0.0, 1.0]]);
        let far = seq(&[[-1.0, 0.0], [0.0, -1.0]]);
        let (i, _) = nearest_expert(&a, &[far.clone(), a.clone(), far], CostFunction::Cosine, &SinkhornConfig::default()).unwrap();
        assert_eq!(i, 1);
        let (i, _) = nearest_expert(&a, &[a.clone(), a.clone()], CostFunction::Cosine, &SinkhornConfig::default()).unwrap();
        assert_eq!(i, 0);
        assert!(nearest_expert(&a, &[], CostFunction::Cosine, &SinkhornConfig::default()).is_err());
    }
}
