use alloc::vec;
use alloc::vec::Vec;

use super::physics::{Pendulum, PointMass, GOAL};
use crate::math;

pub const FRAME_H: usize = 16;
pub const FRAME_W: usize = 16;
/// Clean background level. Every pixel at exactly this value belongs to the
/// background class; anything else is foreground.
pub const BACKGROUND: f64 = 0.0;
pub const AGENT_VALUE: f64 = 1.0;
pub const GOAL_VALUE: f64 = 0.6;
pub const POLE_LENGTH_PX: f64 = 6.0;

/// Antialiased coverage for a pixel whose centre is `d` pixels from a shape
/// of the given core radius.
#[inline]
fn coverage(d: f64, core_radius: f64) -> f64 {
    (1.0 + core_radius - d).clamp(0.0, 1.0)
}

/// World `[-1, 1]²` to continuous pixel coordinates `(col, row)`; y points up.
pub(crate) fn world_to_px(x: f64, y: f64) -> (f64, f64) {
    ((x + 1.0) * 0.5 * FRAME_W as f64, (1.0 - y) * 0.5 * FRAME_H as f64)
}

pub fn render_point_reach(state: &PointMass) -> Vec<f64> {
    let mut frame = vec![BACKGROUND; FRAME_H * FRAME_W];
    let (gc, gr) = world_to_px(GOAL[0], GOAL[1]);
    let (gc, gr) = (math::floor(gc) as isize, math::floor(gr) as isize);
    for r in gr - 1..=gr {
        for c in gc - 1..=gc {
            if (0..FRAME_H as isize).contains(&r) && (0..FRAME_W as isize).contains(&c) {
                frame[r as usize * FRAME_W + c as usize] = GOAL_VALUE;
            }
        }
    }
    let (ac, ar) = world_to_px(state.pos[0], state.pos[1]);
    for r in 0..FRAME_H {
        for c in 0..FRAME_W {
            let dc = c as f64 + 0.5 - ac;
            let dr = r as f64 + 0.5 - ar;
            let cov = coverage(math::sqrt(dc * dc + dr * dr), 0.8);
            let px = &mut frame[r * FRAME_W + c];
            *px = px.max(cov * AGENT_VALUE);
        }
    }
    frame
}

/// Pole tip in continuous pixel coordinates `(col, row)`.
pub(crate) fn pole_tip(angle: f64) -> (f64, f64) {
    let (cc, cr) = (FRAME_W as f64 * 0.5, FRAME_H as f64 * 0.5);
    (cc + POLE_LENGTH_PX * math::sin(angle), cr - POLE_LENGTH_PX * math::cos(angle))
}

pub fn render_pendulum(state: &Pendulum) -> Vec<f64> {
    let mut frame = vec![BACKGROUND; FRAME_H * FRAME_W];
    let (cc, cr) = (FRAME_W as f64 * 0.5, FRAME_H as f64 * 0.5);
    let (tc, tr) = pole_tip(state.angle);
    let (dx, dy) = (tc - cc, tr - cr);
    let len2 = dx * dx + dy * dy;
    for r in 0..FRAME_H {
        for c in 0..FRAME_W {
            let (px, py) = (c as f64 + 0.5 - cc, r as f64 + 0.5 - cr);
            let s = ((px * dx + py * dy) / len2).clamp(0.0, 1.0);
            let (ex, ey) = (px - s * dx, py - s * dy);
            let cov = coverage(math::sqrt(ex * ex + ey * ey), 0.5);
            frame[r * FRAME_W + c] = cov * AGENT_VALUE;
        }
    }
    frame
}
