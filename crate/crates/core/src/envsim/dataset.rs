use alloc::vec::Vec;

use super::env::{EnvId, PixelEnv};
use super::expert::expert_action;
use super::observation::PixelObservation;
use super::perturb::PerturbationSpec;
use crate::rng::{SeedTree, Stream};
use crate::{math, Error, Result};

pub const DATASET_VERSION: u32 = 1;

/// A length-`T` episode stored as `T + 1` observations and `T` actions, so
/// step `t`'s next observation is step `t + 1`'s observation by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    observations: Vec<PixelObservation>,
    actions: Vec<Vec<f64>>,
    diag_rewards: Vec<f64>,
}

impl Trajectory {
    pub fn new(
        observations: Vec<PixelObservation>,
        actions: Vec<Vec<f64>>,
        diag_rewards: Vec<f64>,
    ) -> Result<Self> {
        if actions.is_empty() || observations.len() != actions.len() + 1 {
            return Err(Error::contract("a trajectory needs T >= 1 actions and T + 1 observations"));
        }
        if !diag_rewards.is_empty() && diag_rewards.len() != actions.len() {
            return Err(Error::contract("diagnostic rewards must be empty or have length T"));
        }
        let dim = actions[0].len();
        if actions.iter().any(|a| a.len() != dim) {
            return Err(Error::contract("actions must share one dimension"));
        }
        let shape = |o: &PixelObservation| (o.frames(), o.height(), o.width());
        if observations.iter().any(|o| shape(o) != shape(&observations[0])) {
            return Err(Error::contract("observations must share one shape"));
        }
        Ok(Self { observations, actions, diag_rewards })
    }

    /// Horizon `T`.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action_dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn observations(&self) -> &[PixelObservation] {
        &self.observations
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn diag_rewards(&self) -> &[f64] {
        &self.diag_rewards
    }

    /// `(o_t, a_t, o_{t+1})`.
    pub fn transition(&self, t: usize) -> (&PixelObservation, &[f64], &PixelObservation) {
        (&self.observations[t], &self.actions[t], &self.observations[t + 1])
    }

    /// Observations reached by the actions, `o_1 … o_T`.
    pub fn visited(&self) -> &[PixelObservation] {
        &self.observations[1..]
    }

    pub fn diag_return(&self) -> f64 {
        self.diag_rewards.iter().sum()
    }
}

/// Demonstrations collected by a scripted expert in the clean environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDataset {
    pub env_id: EnvId,
    pub perturbation: PerturbationSpec,
    pub version: u32,
    trajectories: Vec<Trajectory>,
}

impl ExpertDataset {
    pub fn new(env_id: EnvId, trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories.first().ok_or_else(|| Error::contract("dataset needs N >= 1"))?;
        let (t, d) = (first.len(), first.action_dim());
        if trajectories.iter().any(|tr| tr.len() != t || tr.action_dim() != d) {
            return Err(Error::contract("trajectories must share T and action dimension"));
        }
        if d != env_id.action_dim() {
            return Err(Error::contract("action dimension does not match the environment"));
        }
        Ok(Self { env_id, perturbation: PerturbationSpec::none(), version: DATASET_VERSION, trajectories })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories[0].len()
    }

    pub fn action_dim(&self) -> usize {
        self.trajectories[0].action_dim()
    }

    /// Mean diagnostic return: the "expert line" used for fraction-of-expert.
    pub fn expert_return(&self) -> f64 {
        let returns: Vec<f64> = self.trajectories.iter().map(Trajectory::diag_return).collect();
        math::mean(&returns)
    }
}

/// Runs the scripted expert for `n` episodes of length `horizon` in the clean
/// environment. Episode `i` starts from seed `SeedTree(seed)[Expert, i]`.
pub fn collect_expert(env_id: EnvId, n: usize, horizon: usize, seed: u64) -> Result<ExpertDataset> {
    if n == 0 {
        return Err(Error::contract("collect_expert needs N >= 1"));
    }
    let tree = SeedTree::new(seed);
    let mut env = PixelEnv::new(env_id, PerturbationSpec::none(), horizon)?;
    let mut trajectories = Vec::with_capacity(n);
    for i in 0..n {
        let mut obs = Vec::with_capacity(horizon + 1);
        let mut actions = Vec::with_capacity(horizon);
        let mut rewards = Vec::with_capacity(horizon);
        obs.push(env.reset(tree.seed(Stream::Expert, i as u64)));
        while !env.is_done() {
            let a = expert_action(&env).expect("env was reset");
            let out = env.step(&a)?;
            obs.push(out.observation);
            actions.push(a);
            rewards.push(out.diag_reward);
        }
        trajectories.push(Trajectory::new(obs, actions, rewards)?);
    }
    ExpertDataset::new(env_id, trajectories)
}
