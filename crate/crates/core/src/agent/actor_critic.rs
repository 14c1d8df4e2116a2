use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::buffer::Batch;
use crate::diffcore::{Activation, AdamConfig, Mlp, ParameterSet, Tape, Tensor, Var};
use crate::envsim::{PixelObservation, Trajectory};
use crate::repr::{inverse_loss_from_embeddings, Encoder, InverseModel};
use crate::{Error, Result};

/// Gaussian noise scales for exploration and target-policy smoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationSpec {
    pub sigma_explore: f64,
    pub sigma_target: f64,
    /// Both noises are clipped to `[−c, c]`.
    pub noise_clip: f64,
}

impl Default for ExplorationSpec {
    fn default() -> Self {
        Self { sigma_explore: 0.1, sigma_target: 0.2, noise_clip: 0.5 }
    }
}

impl ExplorationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_explore >= 0.0 && self.sigma_target >= 0.0) {
            return Err(Error::Config("exploration sigmas must be >= 0".into()));
        }
        if !(self.noise_clip > 0.0) {
            return Err(Error::Config("noise clip must be > 0".into()));
        }
        Ok(())
    }

    fn clipped<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        (sigma * n).clamp(-self.noise_clip, self.noise_clip)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Polyak rate τ of the target networks.
    pub tau: f64,
    pub policy_delay: u64,
    pub exploration: ExplorationSpec,
    pub adam: AdamConfig,
    /// Weight of the inverse dynamics term; 0 drops it.
    pub inverse_weight: f64,
    pub encoder_hidden: Vec<usize>,
    pub embed_dim: usize,
    pub head_hidden: Vec<usize>,
    pub inverse_hidden: Vec<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            exploration: ExplorationSpec::default(),
            adam: AdamConfig::default(),
            inverse_weight: 1.0,
            encoder_hidden: alloc::vec![256, 128],
            embed_dim: 32,
            head_hidden: alloc::vec![128, 128],
            inverse_hidden: alloc::vec![128],
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must lie in [0, 1]".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config("tau must lie in (0, 1]".into()));
        }
        if self.policy_delay == 0 {
            return Err(Error::Config("policy_delay must be >= 1".into()));
        }
        if !(self.inverse_weight >= 0.0 && self.inverse_weight.is_finite()) {
            return Err(Error::Config("inverse_weight must be finite and >= 0".into()));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be >= 1".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        self.exploration.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Explore,
    Greedy,
}

/// Losses of one joint representation/critic step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointLosses {
    pub inverse: f64,
    pub critic: f64,
}

fn critic(prefix: &str, embed_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Mlp {
    let mut sizes = alloc::vec![embed_dim + action_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    Mlp::new(prefix, &sizes, Activation::Relu, Activation::Identity, rng)
}

fn hstack(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows() != b.rows() {
        return Err(Error::contract("row counts differ"));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    for i in 0..a.rows() {
        data.extend_from_slice(a.row(i));
        data.extend_from_slice(b.row(i));
    }
    Tensor::matrix(a.rows(), a.cols() + b.cols(), data)
}

/// Encoder, inverse model, deterministic actor, twin critics and their
/// Polyak targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub encoder: Encoder,
    pub inverse: InverseModel,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target_actor: Mlp,
    pub target_critic1: Mlp,
    pub target_critic2: Mlp,
    cfg: AgentConfig,
    action_dim: usize,
    critic_updates: u64,
    actor_updates: u64,
}

impl ActorCritic {
    pub fn new<R: Rng>(obs_dim: usize, action_dim: usize, cfg: AgentConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.embed_dim;
        let encoder = Encoder::new(obs_dim, &cfg.encoder_hidden, d, rng);
        let inverse = InverseModel::new(d, &cfg.inverse_hidden, action_dim, rng);
        let mut sizes = alloc::vec![d];
        sizes.extend_from_slice(&cfg.head_hidden);
        sizes.push(action_dim);
        let actor = Mlp::new("actor", &sizes, Activation::Relu, Activation::Tanh, rng);
        let critic1 = critic("critic1", d, action_dim, &cfg.head_hidden, rng);
        let critic2 = critic("critic2", d, action_dim, &cfg.head_hidden, rng);
        let mut target_actor = Mlp::new("target_actor", &sizes, Activation::Relu, Activation::Tanh, rng);
        let mut target_critic1 = critic("target_critic1", d, action_dim, &cfg.head_hidden, rng);
        let mut target_critic2 = critic("target_critic2", d, action_dim, &cfg.head_hidden, rng);
        target_actor.params.copy_values_from(&actor.params)?;
        target_critic1.params.copy_values_from(&critic1.params)?;
        target_critic2.params.copy_values_from(&critic2.params)?;
        Ok(Self {
            encoder,
            inverse,
            actor,
            critic1,
            critic2,
            target_actor,
            target_critic1,
            target_critic2,
            cfg,
            action_dim,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    /// `π(φ(o))`, plus clipped exploration noise in explore mode; always
    /// inside `[−1, 1]`.
    pub fn select_action<R: Rng + ?Sized>(&self, obs: &PixelObservation, mode: ActionMode, rng: &mut R) -> Result<Vec<f64>> {
        let z = self.encoder.encode(obs)?;
        let mut a = self.actor.infer_row(&z)?;
        if mode == ActionMode::Explore {
            let ex = self.cfg.exploration;
            for v in &mut a {
                *v += ex.clipped(ex.sigma_explore, rng);
            }
        }
        a.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        Ok(a)
    }

    pub fn greedy(&self, obs: &PixelObservation) -> Result<Vec<f64>> {
        let z = self.encoder.encode(obs)?;
        let mut a = self.actor.infer_row(&z)?;
        a.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        Ok(a)
    }

    /// Target-policy action `clip(π̂(z') + clip(N(0, σ_target)))`.
    pub fn smoothed_target_actions<R: Rng + ?Sized>(&self, next_z: &Tensor, rng: &mut R) -> Result<Tensor> {
        let mut a = self.target_actor.infer(next_z)?;
        let ex = self.cfg.exploration;
        for v in a.data_mut() {
            *v = (*v + ex.clipped(ex.sigma_target, rng)).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// `y = r + γ(1 − done)·min(Q̂¹, Q̂²)` at the given next embeddings and
    /// actions.
    pub fn td_targets(&self, rewards: &[f64], dones: &[bool], next_z: &Tensor, next_a: &Tensor) -> Result<Vec<f64>> {
        let x = hstack(next_z, next_a)?;
        let q1 = self.target_critic1.infer(&x)?;
        let q2 = self.target_critic2.infer(&x)?;
        Ok(td_targets(rewards, dones, q1.data(), q2.data(), self.cfg.gamma))
    }

    /// Records `Q¹` and `Q²` of embeddings `z` (already on the tape) and
    /// constant actions.
    fn critic_heads(&self, tape: &mut Tape, z: Var, actions: &Tensor) -> Result<(Var, Var, Vec<Var>, Vec<Var>)> {
        let a = tape.constant(actions.clone());
        let x = tape.concat(&[z, a])?;
        let b1 = self.critic1.bind(tape);
        let b2 = self.critic2.bind(tape);
        let q1 = self.critic1.forward(tape, &b1, x)?;
        let q2 = self.critic2.forward(tape, &b2, x)?;
        Ok((q1, q2, b1.vars, b2.vars))
    }

    /// Critic regression alone (no inverse term).
    pub fn critic_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<JointLosses> {
        self.joint_update(batch, None, rng).map(|(l, _)| l)
    }

    /// One backward pass over `w·L_inv + L_Q¹ + L_Q²` and one Adam step on
    /// encoder, inverse model and critics.
    ///
    /// `inverse` holds extra (expert) transitions; the agent rows of `rl`
    /// also enter the inverse loss, weighted by row count. Returns the
    /// losses and the pre-step embeddings of `rl.obs` for the actor.
    pub fn joint_update<R: Rng + ?Sized>(
        &mut self,
        rl: &Batch,
        inverse: Option<&Batch>,
        rng: &mut R,
    ) -> Result<(JointLosses, Tensor)> {
        if rl.is_empty() {
            return Err(Error::contract("critic update needs a non-empty batch"));
        }
        let use_inverse = self.cfg.inverse_weight > 0.0;
        let mut tape = Tape::new();
        let enc = self.encoder.bind(&mut tape);
        let x = tape.constant(rl.obs.clone());
        let z = self.encoder.forward(&mut tape, &enc, x)?;
        let z_value = tape.value(z).clone();

        let (next_z, inverse_loss, inv_vars) = if use_inverse {
            let inv = self.inverse.bind(&mut tape);
            let xn = tape.constant(rl.next_obs.clone());
            let zn = self.encoder.forward(&mut tape, &enc, xn)?;
            let next_z = tape.value(zn).clone();
            let a = tape.constant(rl.actions.clone());
            let mut loss = inverse_loss_from_embeddings(&mut tape, &self.inverse, &inv, z, zn, a)?;
            if let Some(e) = inverse.filter(|e| !e.is_empty()) {
                let xe = tape.constant(e.obs.clone());
                let xen = tape.constant(e.next_obs.clone());
                let ze = self.encoder.forward(&mut tape, &enc, xe)?;
                let zen = self.encoder.forward(&mut tape, &enc, xen)?;
                let ae = tape.constant(e.actions.clone());
                let le = inverse_loss_from_embeddings(&mut tape, &self.inverse, &inv, ze, zen, ae)?;
                let (nb, ne) = (rl.len() as f64, e.len() as f64);
                let la = tape.scale(loss, nb / (nb + ne))?;
                let le = tape.scale(le, ne / (nb + ne))?;
                loss = tape.add(la, le)?;
            }
            (next_z, Some(loss), inv.vars)
        } else {
            (self.encoder.mlp().infer(&rl.next_obs)?, None, Vec::new())
        };

        let next_a = self.smoothed_target_actions(&next_z, rng)?;
        let y = self.td_targets(&rl.rewards, &rl.dones, &next_z, &next_a)?;
        let y = tape.constant(Tensor::matrix(y.len(), 1, y)?);
        let (q1, q2, c1, c2) = self.critic_heads(&mut tape, z, &rl.actions)?;
        let l1 = tape.mse(q1, y)?;
        let l2 = tape.mse(q2, y)?;
        let critic_loss = tape.add(l1, l2)?;
        let total = match inverse_loss {
            Some(li) => {
                let w = tape.scale(li, self.cfg.inverse_weight)?;
                tape.add(w, critic_loss)?
            }
            None => critic_loss,
        };
        let losses = JointLosses {
            inverse: inverse_loss.map(|l| tape.value(l).item()).transpose()?.unwrap_or(0.0),
            critic: tape.value(critic_loss).item()?,
        };
        let grads = tape.backward(total)?;
        self.encoder.mlp_mut().params.accumulate_grads(&grads, &enc.vars);
        self.encoder.mlp_mut().params.adam_step(&self.cfg.adam);
        if use_inverse {
            self.inverse.mlp_mut().params.accumulate_grads(&grads, &inv_vars);
            self.inverse.mlp_mut().params.adam_step(&self.cfg.adam);
        }
        self.critic1.params.accumulate_grads(&grads, &c1);
        self.critic1.params.adam_step(&self.cfg.adam);
        self.critic2.params.accumulate_grads(&grads, &c2);
        self.critic2.params.adam_step(&self.cfg.adam);
        self.critic_updates += 1;
        Ok((losses, z_value))
    }

    /// Whether the schedule calls for an actor step after the latest critic
    /// step.
    pub fn actor_due(&self) -> bool {
        self.critic_updates > 0 && self.critic_updates % self.cfg.policy_delay == 0
    }

    /// Ascends `Q¹(z, π(z))` on detached embeddings `z`, then Polyak-updates
    /// every target network. Returns `−mean Q¹`.
    pub fn actor_update(&mut self, z: &Tensor) -> Result<f64> {
        let mut tape = Tape::new();
        let zb = tape.constant(z.clone());
        let actor = self.actor.bind(&mut tape);
        let a = self.actor.forward(&mut tape, &actor, zb)?;
        let x = tape.concat(&[zb, a])?;
        let c1 = self.critic1.bind_frozen(&mut tape);
        let q = self.critic1.forward(&mut tape, &c1, x)?;
        let q = tape.mean(q)?;
        let loss = tape.scale(q, -1.0)?;
        let value = tape.value(loss).item()?;
        let grads = tape.backward(loss)?;
        self.actor.params.accumulate_grads(&grads, &actor.vars);
        self.actor.params.adam_step(&self.cfg.adam);
        self.actor_updates += 1;
        self.update_targets(self.cfg.tau)?;
        Ok(value)
    }

    pub fn update_targets(&mut self, rate: f64) -> Result<()> {
        self.target_actor.params.polyak_from(&self.actor.params, rate)?;
        self.target_critic1.params.polyak_from(&self.critic1.params, rate)?;
        self.target_critic2.params.polyak_from(&self.critic2.params, rate)
    }

    /// Behaviour cloning of the actor (through the encoder) on expert
    /// `(o_t, a_t)` pairs, in shuffled minibatches. Returns the mean loss of
    /// each epoch; the target actor is reset to the result.
    pub fn bc_pretrain<R: Rng + ?Sized>(
        &mut self,
        expert: &[Trajectory],
        epochs: usize,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if expert.is_empty() {
            return Err(Error::contract("behaviour cloning needs expert data"));
        }
        if batch_size == 0 {
            return Err(Error::Config("bc batch size must be >= 1".into()));
        }
        let pairs: Vec<(&PixelObservation, &[f64])> = expert
            .iter()
            .flat_map(|t| (0..t.len()).map(move |i| (&t.observations()[i], t.actions()[i].as_slice())))
            .collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            // Fisher-Yates with the caller's stream
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            let mut total = 0.0;
            for chunk in order.chunks(batch_size) {
                let obs = self.encoder.batch_matrix(chunk.iter().map(|&i| pairs[i].0))?;
                let act = Tensor::from_rows(&chunk.iter().map(|&i| pairs[i].1).collect::<Vec<_>>())?;
                let mut tape = Tape::new();
                let enc = self.encoder.bind(&mut tape);
                let actor = self.actor.bind(&mut tape);
                let x = tape.constant(obs);
                let z = self.encoder.forward(&mut tape, &enc, x)?;
                let pred = self.actor.forward(&mut tape, &actor, z)?;
                let target = tape.constant(act);
                let loss = tape.mse(pred, target)?;
                total += tape.value(loss).item()? * chunk.len() as f64;
                let grads = tape.backward(loss)?;
                self.encoder.mlp_mut().params.accumulate_grads(&grads, &enc.vars);
                self.encoder.mlp_mut().params.adam_step(&self.cfg.adam);
                self.actor.params.accumulate_grads(&grads, &actor.vars);
                self.actor.params.adam_step(&self.cfg.adam);
            }
            history.push(total / pairs.len() as f64);
        }
        self.target_actor.params.copy_values_from(&self.actor.params)?;
        Ok(history)
    }

    /// Every network's parameters under unique names.
    pub fn parameters(&self) -> ParameterSet {
        let mut out = ParameterSet::new();
        for mlp in self.networks() {
            for e in mlp.params.entries() {
                out.push(e.name.clone(), e.value.clone());
            }
        }
        out
    }

    /// Restores every network from a set produced by
    /// [`parameters`](Self::parameters).
    pub fn load_parameters(&mut self, source: &ParameterSet) -> Result<()> {
        self.encoder.mlp_mut().params.load_values(source)?;
        self.inverse.mlp_mut().params.load_values(source)?;
        for mlp in [
            &mut self.actor,
            &mut self.critic1,
            &mut self.critic2,
            &mut self.target_actor,
            &mut self.target_critic1,
            &mut self.target_critic2,
        ] {
            mlp.params.load_values(source)?;
        }
        Ok(())
    }

    fn networks(&self) -> [&Mlp; 8] {
        [
            self.encoder.mlp(),
            self.inverse.mlp(),
            &self.actor,
            &self.critic1,
            &self.critic2,
            &self.target_actor,
            &self.target_critic1,
            &self.target_critic2,
        ]
    }
}

/// `y_i = r_i + γ(1 − done_i)·min(q1_i, q2_i)`.
pub fn td_targets(rewards: &[f64], dones: &[bool], q1: &[f64], q2: &[f64], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(dones)
        .zip(q1.iter().zip(q2))
        .map(|((&r, &d), (&a, &b))| if d { r } else { r + gamma * a.min(b) })
        .collect()
}
