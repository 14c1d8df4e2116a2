use alloc::vec::Vec;

use super::actor_critic::{ActionMode, ActorCritic};
use super::buffer::{Batch, ReplayBuffer};
use super::config::TrainConfig;
use crate::diffcore::Tensor;
use crate::envsim::{random_action, EnvId, ExpertDataset, PerturbationSpec, PixelEnv, PixelObservation, Trajectory};
use crate::math;
use crate::repr::TargetEncoder;
use crate::reward::{
    combine, episode_rewards, Discriminator, EpisodeRewards, ExpertEmbeddings, RewardConfig, RewardSpace, RunningScale,
};
use crate::rng::{Rng, SeedTree, Stream};
use crate::{Error, Result};

/// Greedy evaluation returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Seeds of the fixed evaluation episodes of a run.
pub fn eval_seeds(master: u64, episodes: usize) -> Vec<u64> {
    let tree = SeedTree::new(master);
    (0..episodes as u64).map(|i| tree.seed(Stream::Eval, i)).collect()
}

/// Diagnostic return of `policy` on each seeded episode; the policy sees
/// only pixels.
pub fn evaluate<F>(env_id: EnvId, spec: PerturbationSpec, horizon: usize, seeds: &[u64], mut policy: F) -> Result<EvalResult>
where
    F: FnMut(&PixelObservation) -> Result<Vec<f64>>,
{
    let mut env = PixelEnv::new(env_id, spec, horizon)?;
    let mut returns = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut obs = env.reset(seed);
        let mut ret = 0.0;
        loop {
            let a = policy(&obs)?;
            let out = env.step(&a)?;
            ret += out.diag_reward;
            obs = out.observation;
            if out.done {
                break;
            }
        }
        returns.push(ret);
    }
    Ok(EvalResult { mean: math::mean(&returns), std: math::std_dev(&returns), returns })
}

/// One row of the training log, written every evaluation interval. Loss and
/// reward columns average everything since the previous row; NaN when
/// nothing happened.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub episode: u64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub l_inv: f64,
    pub l_critic: f64,
    pub l_actor: f64,
    pub l_d: f64,
    pub mean_r1: f64,
    pub mean_r2: f64,
    pub sinkhorn_iters_mean: f64,
}

impl LogRow {
    pub const HEADER: [&'static str; 11] = [
        "step",
        "episode",
        "eval_return_mean",
        "eval_return_std",
        "L_inv",
        "L_critic",
        "L_actor",
        "L_D",
        "mean_R1",
        "mean_R2",
        "sinkhorn_iters_mean",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.eval_return_mean,
            self.eval_return_std,
            self.l_inv,
            self.l_critic,
            self.l_actor,
            self.l_d,
            self.mean_r1,
            self.mean_r2,
            self.sinkhorn_iters_mean,
        ]
    }
}

/// Reward breakdown of one training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub step: u64,
    pub r1: f64,
    pub r2: f64,
    /// Sum of the stored (normalised, combined) rewards.
    pub ri: f64,
    pub expert_index: usize,
    pub sinkhorn_iters: usize,
    pub diag_return: f64,
}

impl EpisodeRecord {
    pub const HEADER: [&'static str; 8] =
        ["episode", "step", "R1", "R2", "R_i", "expert_index", "sinkhorn_iters", "diag_return"];
}

/// Receives log output as training proceeds.
pub trait TrainObserver {
    fn on_episode(&mut self, _record: &EpisodeRecord) -> Result<()> {
        Ok(())
    }

    fn on_eval(&mut self, _row: &LogRow) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Collects everything in memory.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub rows: Vec<LogRow>,
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainObserver for Recorder {
    fn on_episode(&mut self, record: &EpisodeRecord) -> Result<()> {
        self.episodes.push(record.clone());
        Ok(())
    }

    fn on_eval(&mut self, row: &LogRow) -> Result<()> {
        self.rows.push(row.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Mean {
    sum: f64,
    n: u64,
}

impl Mean {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn take(&mut self) -> f64 {
        let v = if self.n == 0 { f64::NAN } else { self.sum / self.n as f64 };
        *self = Self::default();
        v
    }
}

#[derive(Debug, Clone, Default)]
struct Window {
    l_inv: Mean,
    l_critic: Mean,
    l_actor: Mean,
    l_d: Mean,
    r1: Mean,
    r2: Mean,
    iters: Mean,
}

#[derive(Debug, Clone)]
struct Pending {
    observations: Vec<PixelObservation>,
    actions: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Streams {
    explore: Rng,
    batches: Rng,
    target_noise: Rng,
    disc: Rng,
}

/// The full training loop: act, store, reward finished episodes, update.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    dataset: ExpertDataset,
    agent: ActorCritic,
    target: TargetEncoder,
    discriminator: Option<Discriminator>,
    experts: ExpertEmbeddings,
    buffer: ReplayBuffer,
    env: PixelEnv,
    streams: Streams,
    r1_scale: RunningScale,
    r2_scale: RunningScale,
    reward_cfg: RewardConfig,
    step: u64,
    episode: u64,
    updates: u64,
    pending: Pending,
    window: Window,
    bc_losses: Vec<f64>,
    pretrained: bool,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, dataset: ExpertDataset) -> Result<Self> {
        cfg.validate()?;
        if dataset.env_id != cfg.env {
            return Err(Error::Config(alloc::format!(
                "expert dataset is for {}, run is for {}",
                dataset.env_id,
                cfg.env
            )));
        }
        if dataset.horizon() != cfg.horizon {
            return Err(Error::Config("expert dataset horizon differs from the run horizon".into()));
        }
        let tree = SeedTree::new(cfg.seed);
        let mut nets = tree.stream(Stream::Nets);
        let mut agent_cfg = cfg.agent.clone();
        agent_cfg.inverse_weight = cfg.inverse_weight();
        let agent = ActorCritic::new(PixelEnv::obs_dim(), cfg.env.action_dim(), agent_cfg, &mut nets)?;
        let interval = (cfg.target_sync_interval > 0).then_some(cfg.target_sync_interval);
        let target = TargetEncoder::new(&agent.encoder, interval);
        let discriminator = (!cfg.no_discriminator).then(|| {
            let mut rng = tree.stream(Stream::Discriminator);
            Discriminator::new(
                cfg.reward_space.feature_dim(&target),
                cfg.env.action_dim(),
                &cfg.disc_hidden,
                cfg.disc_adam(),
                &mut rng,
            )
        });
        let experts = ExpertEmbeddings::build(&dataset, &target, cfg.reward_space)?;
        let buffer = ReplayBuffer::new(cfg.buffer_capacity, dataset.trajectories().to_vec())?;
        let env = PixelEnv::new(cfg.env, cfg.perturbation, cfg.horizon)?;
        let streams = Streams {
            explore: tree.stream(Stream::Explore),
            batches: tree.stream(Stream::Batches),
            target_noise: tree.stream(Stream::TargetNoise),
            disc: tree.substream(Stream::Discriminator, 1),
        };
        let mut reward_cfg = cfg.reward;
        reward_cfg.eta = cfg.eta();
        let mut trainer = Self {
            cfg,
            dataset,
            agent,
            target,
            discriminator,
            experts,
            buffer,
            env,
            streams,
            r1_scale: RunningScale::new(),
            r2_scale: RunningScale::new(),
            reward_cfg,
            step: 0,
            episode: 0,
            updates: 0,
            pending: Pending { observations: Vec::new(), actions: Vec::new(), diag: Vec::new() },
            window: Window::default(),
            bc_losses: Vec::new(),
            pretrained: false,
        };
        trainer.start_episode();
        Ok(trainer)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn agent(&self) -> &ActorCritic {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut ActorCritic {
        &mut self.agent
    }

    pub fn target(&self) -> &TargetEncoder {
        &self.target
    }

    pub fn discriminator(&self) -> Option<&Discriminator> {
        self.discriminator.as_ref()
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn dataset(&self) -> &ExpertDataset {
        &self.dataset
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn bc_losses(&self) -> &[f64] {
        &self.bc_losses
    }

    fn episode_seed(&self, index: u64) -> u64 {
        SeedTree::new(self.cfg.seed).seed(Stream::Env, index)
    }

    fn start_episode(&mut self) {
        let obs = self.env.reset(self.episode_seed(self.episode));
        self.pending = Pending { observations: alloc::vec![obs], actions: Vec::new(), diag: Vec::new() };
    }

    /// Behaviour cloning on the expert data; syncs the target encoder
    /// afterwards. Runs at most once.
    pub fn pretrain(&mut self) -> Result<&[f64]> {
        if self.pretrained {
            return Ok(&self.bc_losses);
        }
        self.pretrained = true;
        if self.cfg.bc_epochs > 0 {
            let mut rng = SeedTree::new(self.cfg.seed).substream(Stream::Batches, 1);
            self.bc_losses =
                self.agent.bc_pretrain(self.dataset.trajectories(), self.cfg.bc_epochs, self.cfg.bc_batch_size, &mut rng)?;
            self.target.force_sync(&self.agent.encoder)?;
            self.experts.refresh(&self.dataset, &self.target)?;
        }
        Ok(&self.bc_losses)
    }

    /// Greedy evaluation on the run's fixed evaluation seeds.
    pub fn evaluate(&self) -> Result<EvalResult> {
        let seeds = eval_seeds(self.cfg.seed, self.cfg.eval_episodes);
        evaluate(self.cfg.env, self.cfg.perturbation, self.cfg.horizon, &seeds, |o| self.agent.greedy(o))
    }

    /// Trains until `cfg.steps` environment steps have been taken.
    pub fn run(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        self.pretrain()?;
        while self.step < self.cfg.steps {
            self.advance(observer)?;
        }
        Ok(())
    }

    /// One environment step and its updates.
    pub fn advance(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        let obs = self.pending.observations.last().expect("episode started");
        let action = if self.step < self.cfg.random_steps {
            random_action(self.cfg.env, &mut self.streams.explore)
        } else {
            self.agent.select_action(obs, ActionMode::Explore, &mut self.streams.explore)?
        };
        let out = self.env.step(&action)?;
        self.pending.actions.push(action);
        self.pending.observations.push(out.observation);
        self.pending.diag.push(out.diag_reward);
        self.step += 1;
        if out.done {
            self.finish_episode(observer)?;
        }
        if self.buffer.len() >= self.cfg.update_after.max(1) {
            self.update()?;
        }
        if self.target.sync_target(&self.agent.encoder, self.step)? {
            self.on_sync()?;
        }
        if self.step % self.cfg.eval_interval == 0 {
            let eval = self.evaluate()?;
            let w = &mut self.window;
            let row = LogRow {
                step: self.step,
                episode: self.episode,
                eval_return_mean: eval.mean,
                eval_return_std: eval.std,
                l_inv: w.l_inv.take(),
                l_critic: w.l_critic.take(),
                l_actor: w.l_actor.take(),
                l_d: w.l_d.take(),
                mean_r1: w.r1.take(),
                mean_r2: w.r2.take(),
                sinkhorn_iters_mean: w.iters.take(),
            };
            observer.on_eval(&row)?;
        }
        Ok(())
    }

    fn rewards_for(&self, trajectory: &Trajectory) -> Result<EpisodeRewards> {
        episode_rewards(trajectory, &self.experts, &self.target, self.discriminator.as_ref(), &self.reward_cfg)
    }

    fn finish_episode(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        let pending = core::mem::replace(
            &mut self.pending,
            Pending { observations: Vec::new(), actions: Vec::new(), diag: Vec::new() },
        );
        let diag_return: f64 = pending.diag.iter().sum();
        let trajectory = Trajectory::new(pending.observations, pending.actions, pending.diag)?;
        let rewards = self.rewards_for(&trajectory)?;
        let stored = rewards.normalized(&self.reward_cfg, &mut self.r1_scale, &mut self.r2_scale)?;
        let n = rewards.r1.len() as f64;
        self.window.r1.add(rewards.r1.iter().sum::<f64>() / n);
        self.window.r2.add(rewards.r2.iter().sum::<f64>() / n);
        self.window.iters.add(rewards.sinkhorn_iters as f64);
        let record = EpisodeRecord {
            episode: self.episode,
            step: self.step,
            r1: rewards.r1.iter().sum(),
            r2: rewards.r2.iter().sum(),
            ri: stored.iter().sum(),
            expert_index: rewards.expert_index,
            sinkhorn_iters: rewards.sinkhorn_iters,
            diag_return,
        };
        self.buffer.push_episode(self.episode, trajectory, stored)?;
        observer.on_episode(&record)?;
        self.episode += 1;
        self.start_episode();
        Ok(())
    }

    fn update(&mut self) -> Result<()> {
        let rl = Batch::from_transitions(&self.buffer.sample(self.cfg.batch_size, &mut self.streams.batches)?)?;
        let inverse = if self.cfg.inverse_weight() > 0.0 && self.cfg.expert_batch_size > 0 {
            let e = self.buffer.sample_expert(self.cfg.expert_batch_size, &mut self.streams.batches)?;
            Some(Batch::from_transitions(&e)?)
        } else {
            None
        };
        let (losses, z) = self.agent.joint_update(&rl, inverse.as_ref(), &mut self.streams.target_noise)?;
        if self.cfg.inverse_weight() > 0.0 {
            self.window.l_inv.add(losses.inverse);
        }
        self.window.l_critic.add(losses.critic);
        self.updates += 1;
        if self.updates > self.cfg.actor_warmup && self.agent.actor_due() {
            let l = self.agent.actor_update(&z)?;
            self.window.l_actor.add(l);
        }
        if self.discriminator.is_some() && self.updates % self.cfg.disc_update_every == 0 {
            let l = self.discriminator_step()?;
            self.window.l_d.add(l);
        }
        Ok(())
    }

    fn features(&self, obs: &Tensor) -> Result<Tensor> {
        match self.experts.space() {
            RewardSpace::Embedding => self.target.encoder().mlp().infer(obs),
            RewardSpace::RawPixels => Ok(obs.clone()),
        }
    }

    fn discriminator_step(&mut self) -> Result<f64> {
        let n = self.cfg.batch_size;
        let agent = Batch::from_transitions(&self.buffer.sample(n, &mut self.streams.disc)?)?;
        let agent_features = self.features(&agent.obs)?;
        let (ef, ea) = self.experts.sample_pairs(n, &mut self.streams.disc)?;
        let d = self.discriminator.as_mut().expect("checked by caller");
        d.update(&ef, &ea, &agent_features, &agent.actions)
    }

    fn on_sync(&mut self) -> Result<()> {
        self.experts.refresh(&self.dataset, &self.target)?;
        if self.cfg.relabel_on_sync {
            let ids: Vec<u64> = self.buffer.episodes().map(|e| e.id).collect();
            for id in ids {
                let traj = self.buffer.episode(id).expect("listed").trajectory.clone();
                let rewards = self.rewards_for(&traj)?;
                let mut r1 = rewards.r1.clone();
                let mut r2 = rewards.r2.clone();
                if self.reward_cfg.normalize {
                    self.r1_scale.apply(&mut r1);
                    if self.reward_cfg.eta > 0.0 {
                        self.r2_scale.apply(&mut r2);
                    }
                }
                let mut total = combine(&r1, &r2, self.reward_cfg.eta)?;
                total.iter_mut().for_each(|r| *r *= self.reward_cfg.scale);
                if let Some(e) = self.buffer.episodes_mut().find(|e| e.id == id) {
                    e.rewards = total;
                }
            }
        }
        Ok(())
    }
}
