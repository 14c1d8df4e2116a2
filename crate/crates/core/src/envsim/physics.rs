use crate::math;

/// Goal position of `point_reach`, fixed for every episode.
pub const GOAL: [f64; 2] = [0.0, 0.0];
/// Distance at which the point mass counts as having reached the goal.
pub const GOAL_RADIUS: f64 = 0.1;

const POINT_DAMPING: f64 = 0.8;
const POINT_ACCEL: f64 = 0.02;
/// Starting distance range from the goal.
pub(crate) const POINT_START: (f64, f64) = (0.6, 0.95);
/// Reward falls to zero at this distance.
const POINT_REWARD_RANGE: f64 = 0.5;

/// Damped 2-D point mass in `[-1, 1]²`; actions are accelerations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

impl PointMass {
    /// Starts at distance `POINT_START` from the goal in direction `angle`.
    pub fn from_unit(u_angle: f64, u_radius: f64) -> Self {
        let angle = u_angle * 2.0 * core::f64::consts::PI;
        let r = POINT_START.0 + u_radius * (POINT_START.1 - POINT_START.0);
        Self {
            pos: [GOAL[0] + r * math::cos(angle), GOAL[1] + r * math::sin(angle)],
            vel: [0.0, 0.0],
        }
    }

    pub fn step(&mut self, action: [f64; 2]) {
        for i in 0..2 {
            self.vel[i] = POINT_DAMPING * self.vel[i] + POINT_ACCEL * action[i];
            self.pos[i] += self.vel[i];
            if self.pos[i] > 1.0 {
                self.pos[i] = 1.0;
                self.vel[i] = 0.0;
            } else if self.pos[i] < -1.0 {
                self.pos[i] = -1.0;
                self.vel[i] = 0.0;
            }
        }
    }

    pub fn distance(&self) -> f64 {
        let dx = self.pos[0] - GOAL[0];
        let dy = self.pos[1] - GOAL[1];
        math::sqrt(dx * dx + dy * dy)
    }

    /// `max(0, 1 − distance / 0.5)`: 1 on the goal, 0 from half a unit away.
    pub fn reward(&self) -> f64 {
        (1.0 - self.distance() / POINT_REWARD_RANGE).max(0.0)
    }
}

const GRAVITY_TERM: f64 = 15.0; // 3g / 2l
const TORQUE_TERM: f64 = 9.0; // 3·u_max / (m l²)
const PENDULUM_DT: f64 = 0.08;
const MAX_SPEED: f64 = 8.0;

/// Torque-limited pendulum; `angle = 0` is upright, positive clockwise on
/// screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pendulum {
    pub angle: f64,
    pub speed: f64,
}

impl Pendulum {
    /// Hanging down within ±0.3 rad, small initial speed.
    pub fn from_unit(u_angle: f64, u_speed: f64) -> Self {
        Self {
            angle: core::f64::consts::PI + (u_angle * 2.0 - 1.0) * 0.3,
            speed: (u_speed * 2.0 - 1.0) * 0.5,
        }
    }

    pub fn step(&mut self, torque: f64) {
        let acc = GRAVITY_TERM * math::sin(self.angle) + TORQUE_TERM * torque;
        self.speed = (self.speed + acc * PENDULUM_DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.angle = wrap_angle(self.angle + self.speed * PENDULUM_DT);
    }

    /// `(1 + cos angle) / 2`: 1 upright, 0 hanging.
    pub fn reward(&self) -> f64 {
        0.5 * (1.0 + math::cos(self.angle))
    }

    pub(crate) fn gravity_term() -> f64 {
        GRAVITY_TERM
    }

    pub(crate) fn torque_term() -> f64 {
        TORQUE_TERM
    }
}

/// Wraps into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut w = a - two_pi * math::floor((a + core::f64::consts::PI) / two_pi);
    if w <= -core::f64::consts::PI {
        w += two_pi;
    }
    w
}
