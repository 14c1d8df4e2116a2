//! Deterministic toy pixel-control environments.
//!
//! Two tasks render to stacked 16×16 grayscale frames: `point_reach` (a
//! damped point mass pushed towards a fixed goal) and `pendulum_swing`
//! (torque-limited swing-up). Visual perturbations are applied to each newly
//! rendered frame before it enters the frame stack, so they never touch the
//! physics. Scripted experts produce the demonstration datasets.

mod dataset;
mod env;
mod expert;
mod observation;
mod perturb;
mod physics;
mod render;

pub use dataset::{collect_expert, ExpertDataset, Trajectory, DATASET_VERSION};
pub use env::{EnvId, PixelEnv, StepOutcome};
pub use expert::{expert_action, random_action};
pub use observation::PixelObservation;
pub use perturb::{perturb, texture, PerturbationKind, PerturbationSpec, MASK_VALUE};
pub use physics::{Pendulum, PointMass, GOAL, GOAL_RADIUS};
pub use render::{
    render_pendulum, render_point_reach, AGENT_VALUE, BACKGROUND, FRAME_H, FRAME_W, GOAL_VALUE,
    POLE_LENGTH_PX,
};

/// Frames per observation.
pub const FRAME_STACK: usize = 2;
/// Episode length.
pub const HORIZON: usize = 50;
