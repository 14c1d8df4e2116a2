use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use super::observation::PixelObservation;
use super::perturb::{perturb, PerturbationSpec};
use super::physics::{Pendulum, PointMass};
use super::render::{render_pendulum, render_point_reach, FRAME_H, FRAME_W};
use super::{FRAME_STACK, HORIZON};
use crate::rng::{Rng, SeedTree, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvId {
    PointReach,
    PendulumSwing,
}

impl EnvId {
    pub fn action_dim(self) -> usize {
        match self {
            EnvId::PointReach => 2,
            EnvId::PendulumSwing => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::PointReach => "point_reach",
            EnvId::PendulumSwing => "pendulum_swing",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point_reach" => Ok(EnvId::PointReach),
            "pendulum_swing" => Ok(EnvId::PendulumSwing),
            other => Err(Error::Config(alloc::format!("unknown env_id `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Physics {
    Point(PointMass),
    Pendulum(Pendulum),
}

impl Physics {
    fn init(id: EnvId, rng: &mut Rng) -> Self {
        let (u0, u1) = (rng.random::<f64>(), rng.random::<f64>());
        match id {
            EnvId::PointReach => Physics::Point(PointMass::from_unit(u0, u1)),
            EnvId::PendulumSwing => Physics::Pendulum(Pendulum::from_unit(u0, u1)),
        }
    }

    fn render(&self) -> Vec<f64> {
        match self {
            Physics::Point(p) => render_point_reach(p),
            Physics::Pendulum(p) => render_pendulum(p),
        }
    }

    fn step(&mut self, action: &[f64]) {
        match self {
            Physics::Point(p) => p.step([action[0], action[1]]),
            Physics::Pendulum(p) => p.step(action[0]),
        }
    }

    fn reward(&self) -> f64 {
        match self {
            Physics::Point(p) => p.reward(),
            Physics::Pendulum(p) => p.reward(),
        }
    }

    fn state(&self) -> Vec<f64> {
        match self {
            Physics::Point(p) => vec![p.pos[0], p.pos[1], p.vel[0], p.vel[1]],
            Physics::Pendulum(p) => vec![p.angle, p.speed],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: PixelObservation,
    pub done: bool,
    /// Ground-truth task reward for evaluation only; never fed to a learner.
    pub diag_reward: f64,
}

/// One environment instance: physics, renderer, perturbation and frame
/// stack.
#[derive(Debug, Clone)]
pub struct PixelEnv {
    id: EnvId,
    spec: PerturbationSpec,
    horizon: usize,
    physics: Option<Physics>,
    t: usize,
    noise: Rng,
    stack: Vec<f64>,
}

impl PixelEnv {
    pub fn new(id: EnvId, spec: PerturbationSpec, horizon: usize) -> Result<Self> {
        spec.validate(FRAME_H, FRAME_W)?;
        if horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        Ok(Self {
            id,
            spec,
            horizon,
            physics: None,
            t: 0,
            noise: spec.episode_rng(0),
            stack: vec![0.0; FRAME_STACK * FRAME_H * FRAME_W],
        })
    }

    /// Clean environment with the default horizon.
    pub fn clean(id: EnvId) -> Self {
        Self::new(id, PerturbationSpec::none(), HORIZON).expect("default configuration is valid")
    }

    pub fn id(&self) -> EnvId {
        self.id
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn action_dim(&self) -> usize {
        self.id.action_dim()
    }

    pub fn obs_dim() -> usize {
        FRAME_STACK * FRAME_H * FRAME_W
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn perturbation(&self) -> &PerturbationSpec {
        &self.spec
    }

    /// Underlying physical state (diagnostics and scripted experts only).
    pub fn state(&self) -> Option<Vec<f64>> {
        self.physics.as_ref().map(Physics::state)
    }

    pub(crate) fn physics(&self) -> Option<&Physics> {
        self.physics.as_ref()
    }

    fn observe(&mut self) -> PixelObservation {
        let clean = self.physics.as_ref().expect("reset before observe").render();
        let frame = PixelObservation::from_parts(FRAME_H, FRAME_W, 1, clean);
        let frame = perturb(&frame, &self.spec, self.t, &mut self.noise);
        let n = FRAME_H * FRAME_W;
        if self.t == 0 {
            for k in 0..FRAME_STACK {
                self.stack[k * n..(k + 1) * n].copy_from_slice(frame.data());
            }
        } else {
            self.stack.copy_within(n.., 0);
            let last = (FRAME_STACK - 1) * n;
            self.stack[last..].copy_from_slice(frame.data());
        }
        PixelObservation::from_parts(FRAME_H, FRAME_W, FRAME_STACK, self.stack.clone())
    }

    /// Starts an episode; the physical state is a pure function of `seed`.
    pub fn reset(&mut self, seed: u64) -> PixelObservation {
        let mut rng = SeedTree::new(seed).stream(Stream::Env);
        self.physics = Some(Physics::init(self.id, &mut rng));
        self.noise = self.spec.episode_rng(seed);
        self.t = 0;
        self.observe()
    }

    pub fn is_done(&self) -> bool {
        self.physics.is_some() && self.t >= self.horizon
    }

    /// Advances one tick. Action components are clipped to `[-1, 1]`.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.physics.is_none() {
            return Err(Error::Lifecycle("step before reset"));
        }
        if self.is_done() {
            return Err(Error::Lifecycle("step after episode end"));
        }
        if action.len() != self.action_dim() {
            return Err(Error::contract(alloc::format!(
                "{} expects {}-dimensional actions, got {}",
                self.id,
                self.action_dim(),
                action.len()
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::contract("action must be finite".to_string()));
        }
        let clipped: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let physics = self.physics.as_mut().unwrap();
        physics.step(&clipped);
        let diag_reward = physics.reward();
        self.t += 1;
        let observation = self.observe();
        Ok(StepOutcome { observation, done: self.t >= self.horizon, diag_reward })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_env_id_is_a_config_error() {
        assert!(matches!("cartpole".parse::<EnvId>(), Err(Error::Config(_))));
        assert_eq!("pendulum_swing".parse::<EnvId>().unwrap(), EnvId::PendulumSwing);
    }

    #[test]
    fn lifecycle_errors() {
        let mut env = PixelEnv::new(EnvId::PointReach, PerturbationSpec::none(), 2).unwrap();
        assert!(matches!(env.step(&[0.0, 0.0]), Err(Error::Lifecycle(_))));
        env.reset(1);
        assert!(matches!(env.step(&[0.0]), Err(Error::Contract(_))));
        assert!(!env.step(&[0.0, 0.0]).unwrap().done);
        assert!(env.step(&[0.0, 0.0]).unwrap().done);
        assert!(matches!(env.step(&[0.0, 0.0]), Err(Error::Lifecycle(_))));
    }
}
