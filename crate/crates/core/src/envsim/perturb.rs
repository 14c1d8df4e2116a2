use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::observation::PixelObservation;
use super::render::BACKGROUND;
use crate::rng::{splitmix, Rng, SeedTree, Stream};
use crate::{Error, Result};

/// Fill value of masked patches.
pub const MASK_VALUE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationKind {
    None,
    WhiteNoise { sigma: f64 },
    RandomMask { patch_size: usize, patch_count: usize },
    BackgroundShift { texture_count: usize, change_period: usize },
}

/// A visual distractor plus the seed of its per-episode noise streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self { kind: PerturbationKind::None, seed: 0 }
    }

    pub fn new(kind: PerturbationKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, PerturbationKind::None)
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        match self.kind {
            PerturbationKind::None => Ok(()),
            PerturbationKind::WhiteNoise { sigma } if sigma >= 0.0 && sigma.is_finite() => Ok(()),
            PerturbationKind::WhiteNoise { .. } => Err(Error::Config("white_noise sigma must be >= 0".into())),
            PerturbationKind::RandomMask { patch_size, .. }
                if patch_size >= 1 && patch_size <= height.min(width) =>
            {
                Ok(())
            }
            PerturbationKind::RandomMask { .. } => {
                Err(Error::Config("random_mask patch_size must lie in 1..=min(H, W)".into()))
            }
            PerturbationKind::BackgroundShift { texture_count, change_period }
                if texture_count >= 1 && change_period >= 1 =>
            {
                Ok(())
            }
            PerturbationKind::BackgroundShift { .. } => Err(Error::Config(
                "background_shift needs texture_count >= 1 and change_period >= 1".into(),
            )),
        }
    }

    /// Noise stream for the episode started with `episode_seed`.
    pub fn episode_rng(&self, episode_seed: u64) -> Rng {
        SeedTree::new(self.seed ^ splitmix(episode_seed)).stream(Stream::Perturb)
    }
}

const TEXTURE_LATTICE: usize = 5;
const TEXTURE_LO: f64 = 0.05;
const TEXTURE_HI: f64 = 0.45;

/// Seeded value-noise texture `index`: random lattice values bilinearly
/// interpolated over the frame, in `[0.05, 0.45]`.
pub fn texture(seed: u64, index: usize, height: usize, width: usize) -> Vec<f64> {
    let mut rng = SeedTree::new(seed ^ 0x7e37_0000).substream(Stream::Perturb, index as u64 + 1);
    let n = TEXTURE_LATTICE;
    let lattice: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    let mut out = vec![0.0; height * width];
    for r in 0..height {
        for c in 0..width {
            let y = r as f64 / (height.max(2) - 1) as f64 * (n - 1) as f64;
            let x = c as f64 / (width.max(2) - 1) as f64 * (n - 1) as f64;
            let (y0, x0) = ((y as usize).min(n - 2), (x as usize).min(n - 2));
            let (fy, fx) = (y - y0 as f64, x - x0 as f64);
            let v00 = lattice[y0 * n + x0];
            let v01 = lattice[y0 * n + x0 + 1];
            let v10 = lattice[(y0 + 1) * n + x0];
            let v11 = lattice[(y0 + 1) * n + x0 + 1];
            let v = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
            out[r * width + c] = TEXTURE_LO + (TEXTURE_HI - TEXTURE_LO) * v;
        }
    }
    out
}

/// Applies `spec` to every frame of `obs`.
///
/// `step_index` drives the background schedule; `episode_rng` supplies noise
/// and patch positions.
pub fn perturb(obs: &PixelObservation, spec: &PerturbationSpec, step_index: usize, episode_rng: &mut Rng) -> PixelObservation {
    let (h, w) = (obs.height(), obs.width());
    let mut out = obs.clone();
    match spec.kind {
        PerturbationKind::None => {}
        PerturbationKind::WhiteNoise { sigma } => {
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).expect("sigma validated finite and positive");
                for f in 0..obs.frames() {
                    for v in out.frame_mut(f) {
                        *v = (*v + normal.sample(episode_rng)).clamp(0.0, 1.0);
                    }
                }
            }
        }
        PerturbationKind::RandomMask { patch_size, patch_count } => {
            let p = patch_size.min(h).min(w);
            for f in 0..obs.frames() {
                let frame = out.frame_mut(f);
                for _ in 0..patch_count {
                    let r0 = episode_rng.random_range(0..=h - p);
                    let c0 = episode_rng.random_range(0..=w - p);
                    for r in r0..r0 + p {
                        frame[r * w + c0..r * w + c0 + p].iter_mut().for_each(|v| *v = MASK_VALUE);
                    }
                }
            }
        }
        PerturbationKind::BackgroundShift { texture_count, change_period } => {
            let idx = (step_index / change_period.max(1)) % texture_count.max(1);
            let tex = texture(spec.seed, idx, h, w);
            for f in 0..obs.frames() {
                for (v, t) in out.frame_mut(f).iter_mut().zip(&tex) {
                    if *v == BACKGROUND {
                        *v = *t;
                    }
                }
            }
        }
    }
    out
}
