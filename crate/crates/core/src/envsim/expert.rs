use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::env::{EnvId, Physics, PixelEnv};
use super::physics::{wrap_angle, Pendulum, PointMass, GOAL};
use crate::math;
use crate::rng::Rng;

const REACH_KP: f64 = 8.0;
const REACH_KD: f64 = 22.0;

const SWING_PUMP_GAIN: f64 = 1.0;
const BALANCE_COS: f64 = 0.8;
const BALANCE_KP: f64 = 4.0;
const BALANCE_KD: f64 = 1.0;

fn reach(p: &PointMass) -> Vec<f64> {
    (0..2).map(|i| (REACH_KP * (GOAL[i] - p.pos[i]) - REACH_KD * p.vel[i]).clamp(-1.0, 1.0)).collect()
}

/// Energy pumping far from upright, PD balancing near it.
fn swing(p: &Pendulum) -> Vec<f64> {
    let theta = wrap_angle(p.angle);
    if math::cos(theta) > BALANCE_COS {
        return vec![(-(BALANCE_KP * theta + BALANCE_KD * p.speed)).clamp(-1.0, 1.0)];
    }
    let top = Pendulum::gravity_term();
    let energy = 0.5 * p.speed * p.speed + top * math::cos(theta);
    let direction = if p.speed >= 0.0 { 1.0 } else { -1.0 };
    let push = SWING_PUMP_GAIN * (top - energy) / Pendulum::torque_term();
    vec![(direction * push).clamp(-1.0, 1.0)]
}

/// Scripted expert action for the current physical state, or `None` before
/// the first reset.
pub fn expert_action(env: &PixelEnv) -> Option<Vec<f64>> {
    env.physics().map(|p| match p {
        Physics::Point(s) => reach(s),
        Physics::Pendulum(s) => swing(s),
    })
}

/// Uniform action in `[-1, 1]^d`.
pub fn random_action(id: EnvId, rng: &mut Rng) -> Vec<f64> {
    (0..id.action_dim()).map(|_| rng.random_range(-1.0..=1.0)).collect()
}
