use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::cost::CostFunction;
use super::discriminator::R2_MAX;
use super::sinkhorn::SinkhornConfig;
use crate::math;
use crate::{Error, Result};

/// Which transform of `D` becomes R2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum R2Variant {
    /// `−ln D`, as printed; rewards pairs the discriminator finds agent-like.
    PaperLiteral,
    /// `−ln(1 − D)`; rewards pairs the discriminator finds expert-like.
    #[default]
    ExpertLikeness,
}

impl R2Variant {
    /// Clipped to `[−R2_MAX, R2_MAX]`.
    pub fn reward(self, d: f64) -> f64 {
        let r = match self {
            R2Variant::PaperLiteral => -math::ln(d),
            R2Variant::ExpertLikeness => -math::ln(1.0 - d),
        };
        if r.is_nan() {
            return R2_MAX;
        }
        r.clamp(-R2_MAX, R2_MAX)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            R2Variant::PaperLiteral => "paper_literal",
            R2Variant::ExpertLikeness => "expert_likeness",
        }
    }
}

impl fmt::Display for R2Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for R2Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_literal" => Ok(R2Variant::PaperLiteral),
            "expert_likeness" => Ok(R2Variant::ExpertLikeness),
            other => Err(Error::Config(alloc::format!("unknown R2 variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    /// Weight η of R2.
    pub eta: f64,
    pub variant: R2Variant,
    pub cost: CostFunction,
    pub sinkhorn: SinkhornConfig,
    /// Standardise each stream by its running mean and deviation before
    /// combining.
    pub normalize: bool,
    /// Final multiplier on the combined reward.
    pub scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            variant: R2Variant::default(),
            cost: CostFunction::default(),
            sinkhorn: SinkhornConfig::default(),
            normalize: true,
            scale: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::Config("eta must be finite and >= 0".into()));
        }
        if !self.scale.is_finite() {
            return Err(Error::Config("reward scale must be finite".into()));
        }
        self.sinkhorn.validate()
    }
}

/// `R1 + η·R2`, elementwise.
pub fn combine(r1: &[f64], r2: &[f64], eta: f64) -> Result<Vec<f64>> {
    if r1.len() != r2.len() {
        return Err(Error::contract("reward streams differ in length"));
    }
    Ok(r1.iter().zip(r2).map(|(a, b)| a + eta * b).collect())
}

/// Running mean and standard deviation of a reward stream (Welford).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningScale {
    count: u64,
    mean: f64,
    m2: f64,
}

const MIN_STD: f64 = 1e-8;

impl RunningScale {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn observe(&mut self, xs: &[f64]) {
        for &x in xs {
            self.count += 1;
            let delta = x - self.mean;
            self.mean += delta / self.count as f64;
            self.m2 += delta * (x - self.mean);
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population deviation; 1 until two values were seen.
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            return 1.0;
        }
        math::sqrt(self.m2 / self.count as f64)
    }

    /// `(x − mean) / std`.
    pub fn apply(&self, xs: &mut [f64]) {
        let s = self.std().max(MIN_STD);
        let m = if self.count == 0 { 0.0 } else { self.mean };
        xs.iter_mut().for_each(|x| *x = (*x - m) / s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_examples() {
        assert!((combine(&[-0.3], &[0.5], 1.0).unwrap()[0] - 0.2).abs() < 1e-15);
        assert_eq!(combine(&[-0.3, 0.1], &[0.0, 0.0], 2.0).unwrap(), alloc::vec![-0.3, 0.1]);
        assert_eq!(combine(&[-0.3], &[7.0], 0.0).unwrap(), alloc::vec![-0.3]);
        assert!(combine(&[0.0], &[], 1.0).is_err());
    }

    #[test]
    fn variants_at_half_and_saturation() {
        let ln2 = core::f64::consts::LN_2;
        assert!((R2Variant::PaperLiteral.reward(0.5) - ln2).abs() < 1e-12);
        assert!((R2Variant::ExpertLikeness.reward(0.5) - ln2).abs() < 1e-12);
        assert_eq!(R2Variant::ExpertLikeness.reward(1.0 - 1e-13), R2_MAX);
        assert_eq!(R2Variant::ExpertLikeness.reward(1.0), R2_MAX);
        assert_eq!(R2Variant::PaperLiteral.reward(1e-300), R2_MAX);
    }

    #[test]
    fn running_scale_standardizes() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let mut s = RunningScale::new();
        assert_eq!(s.std(), 1.0);
        s.observe(&xs[..1]);
        s.observe(&xs[1..]);
        assert!((s.std() - math::std_dev(&xs)).abs() < 1e-12);
        assert!((s.mean() - 2.5).abs() < 1e-12);
        let mut v = xs;
        s.apply(&mut v);
        assert!(math::mean(&v).abs() < 1e-12);
        assert!((math::std_dev(&v) - 1.0).abs() < 1e-12);
    }
}
