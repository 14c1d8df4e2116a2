//! Imitative rewards.
//!
//! A behaviour trajectory is aligned to its nearest expert trajectory with
//! entropic optimal transport in embedding space; each step's reward is the
//! negative cost it transports ([`ot_rewards`]). A GAIL-style
//! [`Discriminator`] scores state-action pairs ([`discriminator_reward`]),
//! and [`combine`] adds the two streams with weight η.

mod combine;
mod cost;
mod discriminator;
mod episode;
mod ot;
mod sinkhorn;

pub use combine::{combine, R2Variant, RewardConfig, RunningScale};
pub use cost::{cost_matrix, CostFunction, CostMatrix};
pub use discriminator::{discriminator_reward, Discriminator, R2_MAX};
pub use episode::{episode_rewards, EpisodeRewards, ExpertEmbeddings, RewardSpace};
pub use ot::{nearest_expert, ot_rewards, OtRewards};
pub use sinkhorn::{sinkhorn, CouplingPlan, SinkhornConfig, SinkhornOutcome};
