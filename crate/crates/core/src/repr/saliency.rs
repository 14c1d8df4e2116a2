use alloc::vec;
use alloc::vec::Vec;

use super::encoder::Encoder;
use crate::diffcore::{Tape, Tensor};
use crate::envsim::PixelObservation;
use crate::Result;

/// Per-pixel `Σ_i |∂φ_i(o)/∂o_j|`, one backward pass per embedding component.
/// The map has the layout of the observation (frame-major, row-major).
pub fn saliency(encoder: &Encoder, obs: &PixelObservation) -> Result<Vec<f64>> {
    let n = obs.len();
    let mut tape = Tape::new();
    let bound = encoder.mlp().bind_frozen(&mut tape);
    let x = tape.leaf(Tensor::matrix(1, n, obs.data().to_vec())?);
    let z = encoder.forward(&mut tape, &bound, x)?;
    let mut map = vec![0.0; n];
    for i in 0..encoder.embed_dim() {
        let zi = tape.slice(z, i, 1)?;
        let grads = tape.backward(zi)?;
        if let Some(g) = grads.get(x) {
            for (m, d) in map.iter_mut().zip(g.data()) {
                *m += d.abs();
            }
        }
    }
    Ok(map)
}
