use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use super::combine::{combine, RewardConfig, RunningScale};
use super::discriminator::Discriminator;
use super::ot::nearest_expert;
use crate::diffcore::Tensor;
use crate::envsim::{ExpertDataset, Trajectory};
use crate::repr::{EmbeddingSequence, TargetEncoder};
use crate::{Error, Result};

/// Space in which rewards compare observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardSpace {
    /// Target-encoder embeddings.
    #[default]
    Embedding,
    /// Unencoded pixels; a diagnostic baseline.
    RawPixels,
}

impl RewardSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardSpace::Embedding => "embedding",
            RewardSpace::RawPixels => "raw_pixels",
        }
    }

    /// Per-observation features `[T+1, d]` for `o_0 … o_T`.
    pub fn features(self, trajectory: &Trajectory, target: &TargetEncoder) -> Result<Tensor> {
        match self {
            RewardSpace::Embedding => target.encode_batch(trajectory.observations()),
            RewardSpace::RawPixels => {
                let obs = trajectory.observations();
                let cols = obs[0].len();
                let mut data = Vec::with_capacity(obs.len() * cols);
                for o in obs {
                    data.extend_from_slice(o.data());
                }
                Tensor::matrix(obs.len(), cols, data)
            }
        }
    }

    pub fn feature_dim(self, target: &TargetEncoder) -> usize {
        match self {
            RewardSpace::Embedding => target.encoder().embed_dim(),
            RewardSpace::RawPixels => target.encoder().input_dim(),
        }
    }
}

impl fmt::Display for RewardSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(RewardSpace::Embedding),
            "raw_pixels" => Ok(RewardSpace::RawPixels),
            other => Err(Error::Config(alloc::format!("unknown reward space `{other}`"))),
        }
    }
}

fn split(features: &Tensor) -> Result<(Tensor, EmbeddingSequence)> {
    let (rows, cols) = (features.rows(), features.cols());
    if rows < 2 {
        return Err(Error::contract("trajectory needs at least one transition"));
    }
    let data = features.data();
    let before = Tensor::matrix(rows - 1, cols, data[..(rows - 1) * cols].to_vec())?;
    let after = EmbeddingSequence::new(cols, data[cols..].to_vec())?;
    Ok((before, after))
}

fn action_matrix(trajectory: &Trajectory) -> Result<Tensor> {
    Tensor::from_rows(trajectory.actions())
}

/// Expert features under one target-encoder snapshot, recomputed only when
/// the snapshot's fingerprint changes.
#[derive(Debug, Clone)]
pub struct ExpertEmbeddings {
    space: RewardSpace,
    fingerprint: u64,
    /// `o_0 … o_{T−1}`, paired with actions for the discriminator.
    before: Vec<Tensor>,
    actions: Vec<Tensor>,
    /// `o_1 … o_T`, matched by optimal transport.
    visited: Vec<EmbeddingSequence>,
}

impl ExpertEmbeddings {
    pub fn build(dataset: &ExpertDataset, target: &TargetEncoder, space: RewardSpace) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::contract("expert dataset is empty"));
        }
        let mut before = Vec::with_capacity(dataset.len());
        let mut actions = Vec::with_capacity(dataset.len());
        let mut visited = Vec::with_capacity(dataset.len());
        for traj in dataset.trajectories() {
            let (b, v) = split(&space.features(traj, target)?)?;
            before.push(b);
            actions.push(action_matrix(traj)?);
            visited.push(v);
        }
        Ok(Self { space, fingerprint: target.fingerprint(), before, actions, visited })
    }

    /// Rebuilds if `target` changed since the last build; returns whether
    /// it did.
    pub fn refresh(&mut self, dataset: &ExpertDataset, target: &TargetEncoder) -> Result<bool> {
        if self.space == RewardSpace::RawPixels || target.fingerprint() == self.fingerprint {
            return Ok(false);
        }
        *self = Self::build(dataset, target, self.space)?;
        Ok(true)
    }

    pub fn space(&self) -> RewardSpace {
        self.space
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }

    pub fn visited(&self) -> &[EmbeddingSequence] {
        &self.visited
    }

    /// `n` expert `(feature, action)` pairs drawn uniformly with
    /// replacement.
    pub fn sample_pairs<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Tensor, Tensor)> {
        if n == 0 {
            return Err(Error::contract("empty expert batch"));
        }
        let (mut f, mut a) = (Vec::new(), Vec::new());
        for _ in 0..n {
            let i = rng.random_range(0..self.before.len());
            let t = rng.random_range(0..self.before[i].rows());
            f.extend_from_slice(self.before[i].row(t));
            a.extend_from_slice(self.actions[i].row(t));
        }
        Ok((
            Tensor::matrix(n, self.before[0].cols(), f)?,
            Tensor::matrix(n, self.actions[0].cols(), a)?,
        ))
    }
}

/// Reward breakdown of one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRewards {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// `scale·(R1 + η·R2)` of the unnormalised streams.
    pub total: Vec<f64>,
    pub expert_index: usize,
    pub sinkhorn_iters: usize,
    pub converged: bool,
    /// Agent features of `o_0 … o_{T−1}`, reusable as discriminator input.
    pub features: Tensor,
    pub actions: Tensor,
}

impl EpisodeRewards {
    /// Standardises both streams with their running statistics (updated with this
    /// episode first) and combines them.
    pub fn normalized(&self, cfg: &RewardConfig, r1_scale: &mut RunningScale, r2_scale: &mut RunningScale) -> Result<Vec<f64>> {
        let mut r1 = self.r1.clone();
        let mut r2 = self.r2.clone();
        if cfg.normalize {
            r1_scale.observe(&r1);
            r1_scale.apply(&mut r1);
            if cfg.eta > 0.0 {
                r2_scale.observe(&r2);
                r2_scale.apply(&mut r2);
            }
        }
        let mut total = combine(&r1, &r2, cfg.eta)?;
        total.iter_mut().for_each(|r| *r *= cfg.scale);
        Ok(total)
    }
}

/// R1 against the nearest expert plus R2 from `discriminator` (zero when
/// absent), combined with weight η.
pub fn episode_rewards(
    trajectory: &Trajectory,
    experts: &ExpertEmbeddings,
    target: &TargetEncoder,
    discriminator: Option<&Discriminator>,
    cfg: &RewardConfig,
) -> Result<EpisodeRewards> {
    cfg.validate()?;
    if experts.space == RewardSpace::Embedding && experts.fingerprint != target.fingerprint() {
        return Err(Error::contract("expert embeddings are stale for this target encoder"));
    }
    let (features, visited) = split(&experts.space.features(trajectory, target)?)?;
    let (expert_index, ot) = nearest_expert(&visited, &experts.visited, cfg.cost, &cfg.sinkhorn)?;
    let actions = action_matrix(trajectory)?;
    let r2 = match discriminator {
        Some(d) => d.rewards(&features, &actions, cfg.variant)?,
        None => alloc::vec![0.0; ot.rewards.len()],
    };
    let mut total = combine(&ot.rewards, &r2, cfg.eta)?;
    total.iter_mut().for_each(|r| *r *= cfg.scale);
    Ok(EpisodeRewards {
        r1: ot.rewards,
        r2,
        total,
        expert_index,
        sinkhorn_iters: ot.iterations,
        converged: ot.converged,
        features,
        actions,
    })
}
