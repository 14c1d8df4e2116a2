use alloc::vec::Vec;

use rand::Rng;

use crate::diffcore::{Activation, BoundMlp, Mlp, Tape, Tensor, Var};
use crate::envsim::{PixelObservation, Trajectory};
use crate::{Error, Result};

/// Pixel encoder `k·H·W → … → d` with tanh activations throughout, so every
/// embedding component lies in (−1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    mlp: Mlp,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], embed_dim: usize, rng: &mut R) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(embed_dim);
        Self { mlp: Mlp::new("encoder", &sizes, Activation::Tanh, Activation::Tanh, rng) }
    }

    /// Wraps an arbitrary network (linear probes, tests).
    pub fn from_mlp(mlp: Mlp) -> Self {
        Self { mlp }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    fn check(&self, obs: &PixelObservation) -> Result<()> {
        if obs.len() != self.input_dim() {
            return Err(Error::contract(alloc::format!(
                "observation has {} values, encoder expects {}",
                obs.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn encode(&self, obs: &PixelObservation) -> Result<Vec<f64>> {
        self.check(obs)?;
        self.mlp.infer_row(obs.data())
    }

    /// Stacks observations into a `[n, k·H·W]` matrix.
    pub fn batch_matrix<'a, I>(&self, obs: I) -> Result<Tensor>
    where
        I: IntoIterator<Item = &'a PixelObservation>,
    {
        let mut data = Vec::new();
        let mut rows = 0;
        for o in obs {
            self.check(o)?;
            data.extend_from_slice(o.data());
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::contract("empty observation batch"));
        }
        Tensor::matrix(rows, self.input_dim(), data)
    }

    pub fn encode_batch<'a, I>(&self, obs: I) -> Result<Tensor>
    where
        I: IntoIterator<Item = &'a PixelObservation>,
    {
        let x = self.batch_matrix(obs)?;
        self.mlp.infer(&x)
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        self.mlp.bind(tape)
    }

    /// Recorded forward pass of a `[n, k·H·W]` batch already on the tape.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundMlp, x: Var) -> Result<Var> {
        self.mlp.forward(tape, bound, x)
    }
}

/// Frozen copy of the encoder, refreshed every `interval` environment steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEncoder {
    encoder: Encoder,
    interval: Option<u64>,
    syncs: u64,
}

impl TargetEncoder {
    /// `interval = None` never synchronises (the target stays at its
    /// initial copy).
    pub fn new(live: &Encoder, interval: Option<u64>) -> Self {
        Self { encoder: live.clone(), interval: interval.filter(|&i| i > 0), syncs: 0 }
    }

    pub fn interval(&self) -> Option<u64> {
        self.interval
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Hard copy when `step_count` is a multiple of the interval; returns
    /// whether a copy happened.
    pub fn sync_target(&mut self, live: &Encoder, step_count: u64) -> Result<bool> {
        match self.interval {
            Some(i) if step_count % i == 0 => {
                self.force_sync(live)?;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    pub fn force_sync(&mut self, live: &Encoder) -> Result<()> {
        self.encoder.mlp.params.copy_values_from(&live.mlp.params)?;
        self.syncs += 1;
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        self.encoder.mlp.params.fingerprint()
    }

    pub fn encode(&self, obs: &PixelObservation) -> Result<Vec<f64>> {
        self.encoder.encode(obs)
    }

    pub fn encode_batch<'a, I>(&self, obs: I) -> Result<Tensor>
    where
        I: IntoIterator<Item = &'a PixelObservation>,
    {
        self.encoder.encode_batch(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Live,
    Target,
}

/// Ordered per-step vectors of one trajectory (`T × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingSequence {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::contract("embedding sequence length must be a positive multiple of dim"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::contract("embedding rows must share one dimension"));
        }
        Self::new(dim, rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect())
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        let dim = t.cols();
        Self::new(dim, t.into_data())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Embeds the observations a trajectory's actions reached, `o_1 … o_T`.
pub fn encode_traj(
    trajectory: &Trajectory,
    live: &Encoder,
    target: &TargetEncoder,
    which: Which,
) -> Result<EmbeddingSequence> {
    let z = match which {
        Which::Live => live.encode_batch(trajectory.visited())?,
        Which::Target => target.encode_batch(trajectory.visited())?,
    };
    EmbeddingSequence::from_tensor(z)
}
