//! Flat `key = value` run configuration.
//!
//! Every key has a default, `#` starts a comment, and [`RunConfig::to_text`]
//! prints every key in a fixed order so parse, print, parse is stable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rilir_core::agent::TrainConfig;
use rilir_core::envsim::{PerturbationKind, PerturbationSpec};

use crate::error::{HarnessError, Result};

/// A training run: the core configuration plus where data comes from and
/// where results go.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Expert dataset file; empty collects `expert_n` demonstrations in memory.
    pub dataset: Option<PathBuf>,
    pub expert_n: usize,
    pub expert_seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            dataset: None,
            expert_n: 10,
            expert_seed: 1000,
            out: PathBuf::from("runs"),
        }
    }
}

/// Canonical key order.
pub const KEYS: &[&str] = &[
    "env",
    "perturbation",
    "perturbation_seed",
    "horizon",
    "seed",
    "steps",
    "gamma",
    "tau",
    "policy_delay",
    "sigma_explore",
    "sigma_target",
    "noise_clip",
    "lr",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "inverse_weight",
    "encoder_hidden",
    "embed_dim",
    "head_hidden",
    "inverse_hidden",
    "eta",
    "r2_variant",
    "cost",
    "sinkhorn_epsilon",
    "sinkhorn_max_iters",
    "sinkhorn_tolerance",
    "reward_normalize",
    "reward_scale",
    "reward_space",
    "batch_size",
    "expert_batch_size",
    "buffer_capacity",
    "update_after",
    "actor_warmup",
    "random_steps",
    "target_sync_interval",
    "bc_epochs",
    "bc_batch_size",
    "eval_interval",
    "eval_episodes",
    "disc_hidden",
    "disc_lr",
    "disc_update_every",
    "no_representation",
    "no_discriminator",
    "relabel_on_sync",
    "dataset",
    "expert_n",
    "expert_seed",
    "out",
];

/// Core validation messages mapped back to the key they concern.
const CORE_MESSAGES: &[(&str, &str)] = &[
    ("sinkhorn epsilon", "sinkhorn_epsilon"),
    ("sinkhorn max_iters", "sinkhorn_max_iters"),
    ("sinkhorn tolerance", "sinkhorn_tolerance"),
    ("exploration sigmas", "sigma_explore"),
    ("noise clip", "noise_clip"),
    ("white_noise", "perturbation"),
    ("random_mask", "perturbation"),
    ("background_shift", "perturbation"),
    ("gamma", "gamma"),
    ("horizon", "horizon"),
    ("tau ", "tau"),
    ("bc batch size", "bc_batch_size"),
    ("batch sizes", "batch_size"),
    ("policy_delay", "policy_delay"),
    ("buffer", "buffer_capacity"),
    ("inverse_weight", "inverse_weight"),
    ("eta ", "eta"),
    ("eval_interval", "eval_interval"),
    ("eval_episodes", "eval_episodes"),
    ("embed_dim", "embed_dim"),
    ("reward scale", "reward_scale"),
    ("discriminator lr", "disc_lr"),
    ("learning rate", "lr"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| HarnessError::config(key, format!("`{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::config(key, format!("`{value}` is not a boolean"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| parse(key, s.trim())).collect()
}

fn print_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// `none`, `white_noise(σ)`, `random_mask(size,count)` or
/// `background_shift(textures,period)`.
pub fn parse_perturbation(value: &str) -> std::result::Result<PerturbationKind, String> {
    let value = value.trim();
    if value == "none" {
        return Ok(PerturbationKind::None);
    }
    let (name, rest) = value.split_once('(').ok_or_else(|| format!("`{value}` is not a perturbation"))?;
    let args = rest.strip_suffix(')').ok_or_else(|| format!("`{value}` is missing `)`"))?;
    let args: Vec<&str> = args.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<usize>().map_err(|_| format!("`{s}` is not a count"));
    match (name.trim(), args.as_slice()) {
        ("white_noise", [sigma]) => {
            Ok(PerturbationKind::WhiteNoise { sigma: sigma.parse().map_err(|_| format!("`{sigma}` is not a number"))? })
        }
        ("random_mask", [size, count]) => {
            Ok(PerturbationKind::RandomMask { patch_size: num(size)?, patch_count: num(count)? })
        }
        ("background_shift", [textures, period]) => {
            Ok(PerturbationKind::BackgroundShift { texture_count: num(textures)?, change_period: num(period)? })
        }
        _ => Err(format!("`{value}` is not a perturbation")),
    }
}

pub fn print_perturbation(kind: &PerturbationKind) -> String {
    match *kind {
        PerturbationKind::None => "none".into(),
        PerturbationKind::WhiteNoise { sigma } => format!("white_noise({sigma})"),
        PerturbationKind::RandomMask { patch_size, patch_count } => format!("random_mask({patch_size},{patch_count})"),
        PerturbationKind::BackgroundShift { texture_count, change_period } => {
            format!("background_shift({texture_count},{change_period})")
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let t = &mut self.train;
        match key {
            "env" => t.env = parse(key, value)?,
            "perturbation" => {
                t.perturbation.kind = parse_perturbation(value).map_err(|m| HarnessError::config(key, m))?
            }
            "perturbation_seed" => t.perturbation.seed = parse(key, value)?,
            "horizon" => t.horizon = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "steps" => t.steps = parse(key, value)?,
            "gamma" => t.agent.gamma = parse(key, value)?,
            "tau" => t.agent.tau = parse(key, value)?,
            "policy_delay" => t.agent.policy_delay = parse(key, value)?,
            "sigma_explore" => t.agent.exploration.sigma_explore = parse(key, value)?,
            "sigma_target" => t.agent.exploration.sigma_target = parse(key, value)?,
            "noise_clip" => t.agent.exploration.noise_clip = parse(key, value)?,
            "lr" => t.agent.adam.lr = parse(key, value)?,
            "adam_beta1" => t.agent.adam.beta1 = parse(key, value)?,
            "adam_beta2" => t.agent.adam.beta2 = parse(key, value)?,
            "adam_eps" => t.agent.adam.eps = parse(key, value)?,
            "inverse_weight" => t.agent.inverse_weight = parse(key, value)?,
            "encoder_hidden" => t.agent.encoder_hidden = parse_list(key, value)?,
            "embed_dim" => t.agent.embed_dim = parse(key, value)?,
            "head_hidden" => t.agent.head_hidden = parse_list(key, value)?,
            "inverse_hidden" => t.agent.inverse_hidden = parse_list(key, value)?,
            "eta" => t.reward.eta = parse(key, value)?,
            "r2_variant" => t.reward.variant = parse(key, value)?,
            "cost" => t.reward.cost = parse(key, value)?,
            "sinkhorn_epsilon" => t.reward.sinkhorn.epsilon = parse(key, value)?,
            "sinkhorn_max_iters" => t.reward.sinkhorn.max_iters = parse(key, value)?,
            "sinkhorn_tolerance" => t.reward.sinkhorn.tolerance = parse(key, value)?,
            "reward_normalize" => t.reward.normalize = parse_bool(key, value)?,
            "reward_scale" => t.reward.scale = parse(key, value)?,
            "reward_space" => t.reward_space = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "expert_batch_size" => t.expert_batch_size = parse(key, value)?,
            "buffer_capacity" => t.buffer_capacity = parse(key, value)?,
            "update_after" => t.update_after = parse(key, value)?,
            "actor_warmup" => t.actor_warmup = parse(key, value)?,
            "random_steps" => t.random_steps = parse(key, value)?,
            "target_sync_interval" => t.target_sync_interval = parse(key, value)?,
            "bc_epochs" => t.bc_epochs = parse(key, value)?,
            "bc_batch_size" => t.bc_batch_size = parse(key, value)?,
            "eval_interval" => t.eval_interval = parse(key, value)?,
            "eval_episodes" => t.eval_episodes = parse(key, value)?,
            "disc_hidden" => t.disc_hidden = parse_list(key, value)?,
            "disc_lr" => t.disc_lr = parse(key, value)?,
            "disc_update_every" => t.disc_update_every = parse(key, value)?,
            "no_representation" => t.no_representation = parse_bool(key, value)?,
            "no_discriminator" => t.no_discriminator = parse_bool(key, value)?,
            "relabel_on_sync" => t.relabel_on_sync = parse_bool(key, value)?,
            "dataset" => self.dataset = (!value.is_empty()).then(|| PathBuf::from(value)),
            "expert_n" => self.expert_n = parse(key, value)?,
            "expert_seed" => self.expert_seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(HarnessError::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "env" => t.env.to_string(),
            "perturbation" => print_perturbation(&t.perturbation.kind),
            "perturbation_seed" => t.perturbation.seed.to_string(),
            "horizon" => t.horizon.to_string(),
            "seed" => t.seed.to_string(),
            "steps" => t.steps.to_string(),
            "gamma" => t.agent.gamma.to_string(),
            "tau" => t.agent.tau.to_string(),
            "policy_delay" => t.agent.policy_delay.to_string(),
            "sigma_explore" => t.agent.exploration.sigma_explore.to_string(),
            "sigma_target" => t.agent.exploration.sigma_target.to_string(),
            "noise_clip" => t.agent.exploration.noise_clip.to_string(),
            "lr" => t.agent.adam.lr.to_string(),
            "adam_beta1" => t.agent.adam.beta1.to_string(),
            "adam_beta2" => t.agent.adam.beta2.to_string(),
            "adam_eps" => t.agent.adam.eps.to_string(),
            "inverse_weight" => t.agent.inverse_weight.to_string(),
            "encoder_hidden" => print_list(&t.agent.encoder_hidden),
            "embed_dim" => t.agent.embed_dim.to_string(),
            "head_hidden" => print_list(&t.agent.head_hidden),
            "inverse_hidden" => print_list(&t.agent.inverse_hidden),
            "eta" => t.reward.eta.to_string(),
            "r2_variant" => t.reward.variant.to_string(),
            "cost" => t.reward.cost.to_string(),
            "sinkhorn_epsilon" => t.reward.sinkhorn.epsilon.to_string(),
            "sinkhorn_max_iters" => t.reward.sinkhorn.max_iters.to_string(),
            "sinkhorn_tolerance" => t.reward.sinkhorn.tolerance.to_string(),
            "reward_normalize" => t.reward.normalize.to_string(),
            "reward_scale" => t.reward.scale.to_string(),
            "reward_space" => t.reward_space.as_str().to_string(),
            "batch_size" => t.batch_size.to_string(),
            "expert_batch_size" => t.expert_batch_size.to_string(),
            "buffer_capacity" => t.buffer_capacity.to_string(),
            "update_after" => t.update_after.to_string(),
            "actor_warmup" => t.actor_warmup.to_string(),
            "random_steps" => t.random_steps.to_string(),
            "target_sync_interval" => t.target_sync_interval.to_string(),
            "bc_epochs" => t.bc_epochs.to_string(),
            "bc_batch_size" => t.bc_batch_size.to_string(),
            "eval_interval" => t.eval_interval.to_string(),
            "eval_episodes" => t.eval_episodes.to_string(),
            "disc_hidden" => print_list(&t.disc_hidden),
            "disc_lr" => t.disc_lr.to_string(),
            "disc_update_every" => t.disc_update_every.to_string(),
            "no_representation" => t.no_representation.to_string(),
            "no_discriminator" => t.no_discriminator.to_string(),
            "relabel_on_sync" => t.relabel_on_sync.to_string(),
            "dataset" => self.dataset.as_deref().map(|p| p.display().to_string()).unwrap_or_default(),
            "expert_n" => self.expert_n.to_string(),
            "expert_seed" => self.expert_seed.to_string(),
            "out" => self.out.display().to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(line, "expected `key = value`"))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("every canonical key prints"));
        }
        out
    }

    /// Core validation, with the message attached to the nearest key.
    pub fn validate(&self) -> Result<()> {
        if self.expert_n == 0 {
            return Err(HarnessError::config("expert_n", "must be >= 1"));
        }
        self.train.validate().map_err(|e| match e {
            rilir_core::Error::Config(msg) => {
                let key = CORE_MESSAGES.iter().find(|(phrase, _)| msg.contains(phrase)).map_or("config", |p| p.1);
                HarnessError::config(key, msg)
            }
            other => other.into(),
        })
    }

    pub fn perturbation(&self) -> PerturbationSpec {
        self.train.perturbation
    }
}
