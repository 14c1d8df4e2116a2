use alloc::vec::Vec;

use rand::Rng;

use super::encoder::Encoder;
use crate::diffcore::{Activation, BoundMlp, Mlp, Tape, Tensor, Var};
use crate::envsim::PixelObservation;
use crate::{Error, Result};

/// Predicts the action between two consecutive embeddings; tanh head keeps
/// predictions inside the action box.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseModel {
    mlp: Mlp,
}

impl InverseModel {
    pub fn new<R: Rng + ?Sized>(embed_dim: usize, hidden: &[usize], action_dim: usize, rng: &mut R) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(2 * embed_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        Self { mlp: Mlp::new("inverse", &sizes, Activation::Relu, Activation::Tanh, rng) }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        self.mlp.bind(tape)
    }

    pub fn predict(&self, z_t: &[f64], z_next: &[f64]) -> Result<Vec<f64>> {
        let mut x = z_t.to_vec();
        x.extend_from_slice(z_next);
        self.mlp.infer_row(&x)
    }
}

/// A borrowed `(o_t, a_t, o_{t+1})` triple.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub obs: &'a PixelObservation,
    pub action: &'a [f64],
    pub next_obs: &'a PixelObservation,
}

/// Mean over batch and action dimensions of `(f(z_t, z_{t+1}) − a_t)²`.
pub fn inverse_loss_from_embeddings(
    tape: &mut Tape,
    inverse: &InverseModel,
    bound: &BoundMlp,
    z_t: Var,
    z_next: Var,
    actions: Var,
) -> Result<Var> {
    let x = tape.concat(&[z_t, z_next])?;
    let pred = inverse.mlp.forward(tape, bound, x)?;
    tape.mse(pred, actions)
}

/// Records the inverse dynamics loss of `batch`; gradients reach both the
/// inverse model and the encoder.
pub fn inverse_dynamics_loss(
    tape: &mut Tape,
    encoder: &Encoder,
    encoder_bound: &BoundMlp,
    inverse: &InverseModel,
    inverse_bound: &BoundMlp,
    batch: &[Transition<'_>],
) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::contract("inverse dynamics loss of an empty batch"));
    }
    let x = encoder.batch_matrix(batch.iter().map(|t| t.obs))?;
    let xn = encoder.batch_matrix(batch.iter().map(|t| t.next_obs))?;
    let actions = Tensor::from_rows(&batch.iter().map(|t| t.action).collect::<Vec<_>>())?;
    let x = tape.constant(x);
    let xn = tape.constant(xn);
    let a = tape.constant(actions);
    let z = encoder.forward(tape, encoder_bound, x)?;
    let zn = encoder.forward(tape, encoder_bound, xn)?;
    inverse_loss_from_embeddings(tape, inverse, inverse_bound, z, zn, a)
}
