use alloc::vec::Vec;

use super::actor_critic::AgentConfig;
use crate::diffcore::AdamConfig;
use crate::envsim::{EnvId, PerturbationSpec, FRAME_H, FRAME_W, HORIZON};
use crate::reward::{RewardConfig, RewardSpace};
use crate::{Error, Result};

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: EnvId,
    pub perturbation: PerturbationSpec,
    pub horizon: usize,
    pub seed: u64,
    /// Environment steps after behaviour cloning.
    pub steps: u64,
    pub agent: AgentConfig,
    pub reward: RewardConfig,
    pub reward_space: RewardSpace,
    pub batch_size: usize,
    /// Expert transitions added to each inverse dynamics batch.
    pub expert_batch_size: usize,
    pub buffer_capacity: usize,
    /// Agent transitions required before updates start.
    pub update_after: usize,
    /// Updates without an actor step once updates start.
    pub actor_warmup: u64,
    /// Environment steps taken with uniformly random actions before the
    /// actor is used for exploration.
    pub random_steps: u64,
    /// Target encoder sync period Δt in environment steps; 0 never syncs.
    pub target_sync_interval: u64,
    pub bc_epochs: usize,
    pub bc_batch_size: usize,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub disc_hidden: Vec<usize>,
    pub disc_lr: f64,
    /// Discriminator steps happen every this many updates.
    pub disc_update_every: u64,
    pub no_representation: bool,
    pub no_discriminator: bool,
    /// Recompute stored rewards of every buffered episode after a sync.
    pub relabel_on_sync: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvId::PointReach,
            perturbation: PerturbationSpec::none(),
            horizon: HORIZON,
            seed: 0,
            steps: 50_000,
            agent: AgentConfig::default(),
            reward: RewardConfig::default(),
            reward_space: RewardSpace::Embedding,
            batch_size: 128,
            expert_batch_size: 128,
            buffer_capacity: 100_000,
            update_after: 128,
            actor_warmup: 0,
            random_steps: 0,
            target_sync_interval: 500,
            bc_epochs: 50,
            bc_batch_size: 64,
            eval_interval: 1000,
            eval_episodes: 10,
            disc_hidden: alloc::vec![128],
            disc_lr: 3e-4,
            disc_update_every: 1,
            no_representation: false,
            no_discriminator: false,
            relabel_on_sync: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.perturbation.validate(FRAME_H, FRAME_W)?;
        self.agent.validate()?;
        self.reward.validate()?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.batch_size == 0 || self.bc_batch_size == 0 {
            return Err(Error::Config("batch sizes must be >= 1".into()));
        }
        if self.buffer_capacity < self.horizon {
            return Err(Error::Config("buffer_capacity must hold at least one episode".into()));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be >= 1".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be >= 1".into()));
        }
        if !(self.disc_lr > 0.0) || self.disc_update_every == 0 {
            return Err(Error::Config("discriminator lr must be > 0 and disc_update_every >= 1".into()));
        }
        Ok(())
    }

    pub fn inverse_weight(&self) -> f64 {
        if self.no_representation {
            0.0
        } else {
            self.agent.inverse_weight
        }
    }

    pub fn eta(&self) -> f64 {
        if self.no_discriminator {
            0.0
        } else {
            self.reward.eta
        }
    }

    pub fn disc_adam(&self) -> AdamConfig {
        AdamConfig { lr: self.disc_lr, ..self.agent.adam }
    }
}
