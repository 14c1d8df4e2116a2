use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;

use crate::diffcore::Tensor;
use crate::envsim::{PixelObservation, Trajectory};
use crate::{Error, Result};

/// One finished agent episode with its imitation rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredEpisode {
    pub id: u64,
    pub trajectory: Trajectory,
    /// `R_i` per step.
    pub rewards: Vec<f64>,
}

impl StoredEpisode {
    /// `done` flag of step `t`: only the last step ends an episode.
    pub fn done(&self, t: usize) -> bool {
        t + 1 == self.trajectory.len()
    }
}

/// A borrowed transition `(o_t, a_t, o_{t+1}, r, done)`.
#[derive(Debug, Clone, Copy)]
pub struct TransitionRef<'a> {
    pub obs: &'a PixelObservation,
    pub action: &'a [f64],
    pub next_obs: &'a PixelObservation,
    /// `None` for expert transitions, which carry no reward.
    pub reward: Option<f64>,
    pub done: bool,
    pub episode_id: u64,
    pub expert: bool,
}

/// Tensors of a sampled minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Tensor,
    pub actions: Tensor,
    pub next_obs: Tensor,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[TransitionRef<'_>]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::contract("empty batch"))?;
        let (n, d, a) = (items.len(), first.obs.len(), first.action.len());
        let mut obs = Vec::with_capacity(n * d);
        let mut next = Vec::with_capacity(n * d);
        let mut act = Vec::with_capacity(n * a);
        for t in items {
            obs.extend_from_slice(t.obs.data());
            next.extend_from_slice(t.next_obs.data());
            act.extend_from_slice(t.action);
        }
        Ok(Self {
            obs: Tensor::matrix(n, d, obs)?,
            actions: Tensor::matrix(n, a, act)?,
            next_obs: Tensor::matrix(n, d, next)?,
            rewards: items.iter().map(|t| t.reward.unwrap_or(0.0)).collect(),
            dones: items.iter().map(|t| t.done).collect(),
        })
    }
}

/// Agent episodes evicted oldest-first as whole episodes once more than
/// `capacity` transitions are held, plus a separate, never-evicted expert
/// store.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<StoredEpisode>,
    transitions: usize,
    expert: Vec<Trajectory>,
    expert_transitions: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, expert: Vec<Trajectory>) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer capacity must be >= 1".into()));
        }
        let expert_transitions = expert.iter().map(Trajectory::len).sum();
        Ok(Self { capacity, episodes: VecDeque::new(), transitions: 0, expert, expert_transitions })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Agent transitions held.
    pub fn len(&self) -> usize {
        self.transitions
    }

    pub fn is_empty(&self) -> bool {
        self.transitions == 0
    }

    pub fn expert_len(&self) -> usize {
        self.expert_transitions
    }

    pub fn episodes(&self) -> impl Iterator<Item = &StoredEpisode> {
        self.episodes.iter()
    }

    pub fn episodes_mut(&mut self) -> impl Iterator<Item = &mut StoredEpisode> {
        self.episodes.iter_mut()
    }

    pub fn episode(&self, id: u64) -> Option<&StoredEpisode> {
        self.episodes.iter().find(|e| e.id == id)
    }

    pub fn push_episode(&mut self, id: u64, trajectory: Trajectory, rewards: Vec<f64>) -> Result<()> {
        if rewards.len() != trajectory.len() {
            return Err(Error::contract("one reward per step is required"));
        }
        self.transitions += trajectory.len();
        self.episodes.push_back(StoredEpisode { id, trajectory, rewards });
        while self.transitions > self.capacity && self.episodes.len() > 1 {
            let old = self.episodes.pop_front().expect("non-empty");
            self.transitions -= old.trajectory.len();
        }
        Ok(())
    }

    fn locate(&self, mut index: usize) -> (&StoredEpisode, usize) {
        for e in &self.episodes {
            if index < e.trajectory.len() {
                return (e, index);
            }
            index -= e.trajectory.len();
        }
        unreachable!("index within buffer length")
    }

    pub fn transition(&self, index: usize) -> TransitionRef<'_> {
        let (e, t) = self.locate(index);
        let (obs, action, next_obs) = e.trajectory.transition(t);
        TransitionRef { obs, action, next_obs, reward: Some(e.rewards[t]), done: e.done(t), episode_id: e.id, expert: false }
    }

    /// `n` agent transitions, uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<TransitionRef<'_>>> {
        if self.is_empty() {
            return Err(Error::contract("sampling from an empty replay buffer"));
        }
        Ok((0..n).map(|_| self.transition(rng.random_range(0..self.transitions))).collect())
    }

    /// `n` expert transitions, uniformly with replacement.
    pub fn sample_expert<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<TransitionRef<'_>>> {
        if self.expert_transitions == 0 {
            return Err(Error::contract("sampling from an empty expert store"));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut index = rng.random_range(0..self.expert_transitions);
            for (id, traj) in self.expert.iter().enumerate() {
                if index < traj.len() {
                    let (obs, action, next_obs) = traj.transition(index);
                    out.push(TransitionRef {
                        obs,
                        action,
                        next_obs,
                        reward: None,
                        done: index + 1 == traj.len(),
                        episode_id: id as u64,
                        expert: true,
                    });
                    break;
                }
                index -= traj.len();
            }
        }
        Ok(out)
    }
}
