use alloc::string::String;
use alloc::vec::Vec;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// One named tensor with its gradient and Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    m: Tensor,
    v: Tensor,
}

impl ParamEntry {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Self { name: name.into(), grad: zeros.clone(), m: zeros.clone(), v: zeros, value }
    }
}

/// Named parameter tensors trained together by one Adam state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    entries: Vec<ParamEntry>,
    step: u64,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.entries.push(ParamEntry::new(name, value));
        self.entries.len() - 1
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.value)
    }

    pub fn value(&self, index: usize) -> &Tensor {
        &self.entries[index].value
    }

    pub fn value_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].value
    }

    pub fn grad(&self, index: usize) -> &Tensor {
        &self.entries[index].grad
    }

    pub fn adam_steps(&self) -> u64 {
        self.step
    }

    /// Number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Places every tensor on the tape as a gradient-receiving leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.entries.iter().map(|e| tape.leaf(e.value.clone())).collect()
    }

    /// Places every tensor on the tape as a constant.
    pub fn bind_frozen(&self, tape: &mut Tape) -> Vec<Var> {
        self.entries.iter().map(|e| tape.constant(e.value.clone())).collect()
    }

    /// Adds the gradients of `vars` (as returned by [`bind`](Self::bind)) into
    /// the gradient buffers. Parameters the loss does not reach are left alone.
    pub fn accumulate_grads(&mut self, grads: &Gradients, vars: &[Var]) {
        debug_assert_eq!(vars.len(), self.entries.len());
        for (entry, var) in self.entries.iter_mut().zip(vars) {
            if let Some(g) = grads.get(*var) {
                entry.grad.add_assign(g);
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Bias-corrected Adam update; clears the gradient buffers afterwards.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - math::powi(cfg.beta1, t);
        let c2 = 1.0 - math::powi(cfg.beta2, t);
        for e in &mut self.entries {
            let p = e.value.data_mut();
            let g = e.grad.data_mut();
            let m = e.m.data_mut();
            let v = e.v.data_mut();
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= cfg.lr * mhat / (math::sqrt(vhat) + cfg.eps);
                g[i] = 0.0;
            }
        }
    }

    fn check_layout(&self, other: &ParameterSet) -> Result<()> {
        let same = self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.value.shape() == b.value.shape());
        if same {
            Ok(())
        } else {
            Err(Error::contract("parameter sets have different layouts"))
        }
    }

    /// Hard copy of `other`'s values; optimiser state is untouched.
    pub fn copy_values_from(&mut self, other: &ParameterSet) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.value.data_mut().copy_from_slice(b.value.data());
        }
        Ok(())
    }

    /// `self ← rate·other + (1 − rate)·self`.
    pub fn polyak_from(&mut self, other: &ParameterSet, rate: f64) -> Result<()> {
        self.check_layout(other)?;
        if rate == 1.0 {
            return self.copy_values_from(other);
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            for (x, y) in a.value.data_mut().iter_mut().zip(b.value.data()) {
                *x = rate * y + (1.0 - rate) * *x;
            }
        }
        Ok(())
    }

    /// FNV-1a hash over names and value bits; equal fingerprints mean equal
    /// parameters for all practical purposes.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for e in &self.entries {
            mix(e.name.as_bytes());
            for v in e.value.data() {
                mix(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    /// Builds a set from `(name, tensor)` pairs, e.g. after decoding a file.
    pub fn from_named(tensors: Vec<(String, Tensor)>) -> Self {
        let mut set = Self::new();
        for (n, t) in tensors {
            set.push(n, t);
        }
        set
    }

    /// Overwrites values from a decoded set matched by name.
    pub fn load_values(&mut self, source: &ParameterSet) -> Result<()> {
        for e in &mut self.entries {
            let src = source
                .get(&e.name)
                .ok_or_else(|| Error::Config(alloc::format!("missing parameter `{}`", e.name)))?;
            if src.shape() != e.value.shape() {
                return Err(Error::Config(alloc::format!("parameter `{}` has the wrong shape", e.name)));
            }
            e.value = src.clone();
        }
        Ok(())
    }
}
