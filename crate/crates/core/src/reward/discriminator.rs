use alloc::vec::Vec;

use rand::Rng;

use super::combine::R2Variant;
use crate::diffcore::{Activation, AdamConfig, BoundMlp, Mlp, Tape, Tensor, Var};
use crate::math;
use crate::{Error, Result};

/// Clip bound applied to every R2 value.
pub const R2_MAX: f64 = 10.0;

/// Logits are clamped here so `D` stays strictly inside (0, 1).
const LOGIT_BOUND: f64 = 30.0;

/// Classifier `D(z, a)`: expert pairs toward 1, agent pairs toward 0.
///
/// The network emits a logit; `D = sigmoid(logit)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    mlp: Mlp,
    adam: AdamConfig,
    action_dim: usize,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        feature_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        adam: AdamConfig,
        rng: &mut R,
    ) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(feature_dim + action_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mlp = Mlp::new("discriminator", &sizes, Activation::Relu, Activation::Identity, rng);
        Self { mlp, adam, action_dim }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn feature_dim(&self) -> usize {
        self.mlp.input_dim() - self.action_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn pairs(&self, features: &Tensor, actions: &Tensor) -> Result<Tensor> {
        if features.rank() != 2
            || actions.rank() != 2
            || features.rows() != actions.rows()
            || features.cols() != self.feature_dim()
            || actions.cols() != self.action_dim
            || features.rows() == 0
        {
            return Err(Error::Dimension {
                op: "discriminator",
                shapes: alloc::vec![features.shape().to_vec(), actions.shape().to_vec()],
            });
        }
        let mut data = Vec::with_capacity(features.rows() * self.mlp.input_dim());
        for i in 0..features.rows() {
            data.extend_from_slice(features.row(i));
            data.extend_from_slice(actions.row(i));
        }
        Tensor::matrix(features.rows(), self.mlp.input_dim(), data)
    }

    /// `D` for each row pair.
    pub fn probs(&self, features: &Tensor, actions: &Tensor) -> Result<Vec<f64>> {
        let x = self.pairs(features, actions)?;
        let z = self.mlp.infer(&x)?;
        Ok(z.data().iter().map(|&l| math::sigmoid(l.clamp(-LOGIT_BOUND, LOGIT_BOUND))).collect())
    }

    pub fn prob(&self, feature: &[f64], action: &[f64]) -> Result<f64> {
        let f = Tensor::matrix(1, feature.len(), feature.to_vec())?;
        let a = Tensor::matrix(1, action.len(), action.to_vec())?;
        Ok(self.probs(&f, &a)?[0])
    }

    fn record_loss(&self, tape: &mut Tape, expert: &Tensor, agent: &Tensor) -> Result<(Var, BoundMlp)> {
        let bound = self.mlp.bind(tape);
        let xe = tape.constant(expert.clone());
        let xa = tape.constant(agent.clone());
        let ze = self.mlp.forward(tape, &bound, xe)?;
        let ze = tape.clip(ze, -LOGIT_BOUND, LOGIT_BOUND)?;
        let za = self.mlp.forward(tape, &bound, xa)?;
        let za = tape.clip(za, -LOGIT_BOUND, LOGIT_BOUND)?;
        let za = tape.scale(za, -1.0)?;
        // log D(expert) and log(1 − D(agent)) = log sigmoid(−z)
        let le = tape.sigmoid(ze)?;
        let le = tape.log(le)?;
        let le = tape.mean(le)?;
        let la = tape.sigmoid(za)?;
        let la = tape.log(la)?;
        let la = tape.mean(la)?;
        let sum = tape.add(le, la)?;
        Ok((tape.scale(sum, -1.0)?, bound))
    }

    /// `L_D = −E[log D(expert)] − E[log(1 − D(agent))]` without updating.
    pub fn loss(
        &self,
        expert_features: &Tensor,
        expert_actions: &Tensor,
        agent_features: &Tensor,
        agent_actions: &Tensor,
    ) -> Result<f64> {
        let e = self.pairs(expert_features, expert_actions)?;
        let a = self.pairs(agent_features, agent_actions)?;
        let mut tape = Tape::new();
        let (loss, _) = self.record_loss(&mut tape, &e, &a)?;
        tape.value(loss).item()
    }

    /// One Adam step on `L_D`; returns the loss before the step.
    pub fn update(
        &mut self,
        expert_features: &Tensor,
        expert_actions: &Tensor,
        agent_features: &Tensor,
        agent_actions: &Tensor,
    ) -> Result<f64> {
        let e = self.pairs(expert_features, expert_actions)?;
        let a = self.pairs(agent_features, agent_actions)?;
        let mut tape = Tape::new();
        let (loss, bound) = self.record_loss(&mut tape, &e, &a)?;
        let value = tape.value(loss).item()?;
        let grads = tape.backward(loss)?;
        self.mlp.params.accumulate_grads(&grads, &bound.vars);
        self.mlp.params.adam_step(&self.adam);
        Ok(value)
    }

    /// R2 for each row pair.
    pub fn rewards(&self, features: &Tensor, actions: &Tensor, variant: R2Variant) -> Result<Vec<f64>> {
        Ok(self.probs(features, actions)?.into_iter().map(|p| variant.reward(p)).collect())
    }
}

/// R2 of a single pair.
pub fn discriminator_reward(
    discriminator: &Discriminator,
    feature: &[f64],
    action: &[f64],
    variant: R2Variant,
) -> Result<f64> {
    Ok(variant.reward(discriminator.prob(feature, action)?))
}
