//! TD3 learner with behaviour-cloning initialisation and the joint
//! representation/critic objective, plus the training loop around it.

mod actor_critic;
mod buffer;
mod config;
mod trainer;

pub use actor_critic::{td_targets, ActionMode, ActorCritic, AgentConfig, ExplorationSpec, JointLosses};
pub use buffer::{Batch, ReplayBuffer, StoredEpisode, TransitionRef};
pub use config::TrainConfig;
pub use trainer::{
    eval_seeds, evaluate, EpisodeRecord, EvalResult, LogRow, Recorder, TrainObserver, Trainer,
};
