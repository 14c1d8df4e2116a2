use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::kernels;
use super::params::ParameterSet;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => math::tanh(x),
            Activation::Sigmoid => math::sigmoid(x),
        }
    }

    fn on_tape(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// Fully connected network `sizes[0] → … → sizes[n]`, weights stored as
/// `[in, out]` so a batch `[rows, in]` multiplies on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub params: ParameterSet,
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
}

/// Parameter handles of one [`Mlp`] placed on a tape.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    pub vars: Vec<Var>,
}

impl Mlp {
    /// Uniform `±1/√fan_in` weights and zero biases.
    pub fn new<R: Rng + ?Sized>(
        prefix: &str,
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let mut params = ParameterSet::new();
        for (i, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / math::sqrt(fan_in as f64);
            let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(format!("{prefix}.w{i}"), Tensor::from_parts(vec![fan_in, fan_out], data));
            params.push(format!("{prefix}.b{i}"), Tensor::zeros(&[fan_out]));
        }
        Self { params, sizes: sizes.to_vec(), hidden, output }
    }

    /// Multiplies the last layer's weights by `factor` (small policy heads).
    pub fn scale_last_layer(&mut self, factor: f64) {
        let idx = self.params.len() - 2;
        self.params.value_mut(idx).data_mut().iter_mut().for_each(|w| *w *= factor);
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        BoundMlp { vars: self.params.bind(tape) }
    }

    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundMlp {
        BoundMlp { vars: self.params.bind_frozen(tape) }
    }

    /// Recorded forward pass of a `[rows, in]` batch.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundMlp, x: Var) -> Result<Var> {
        let mut h = x;
        for layer in 0..self.layers() {
            let z = tape.matmul(h, bound.vars[2 * layer])?;
            let z = tape.add(z, bound.vars[2 * layer + 1])?;
            h = self.activation(layer).on_tape(tape, z)?;
        }
        Ok(h)
    }

    /// Tape-free forward pass; bit-identical to [`forward`](Self::forward).
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 || x.cols() != self.input_dim() {
            return Err(Error::Dimension {
                op: "mlp",
                shapes: vec![x.shape().to_vec(), vec![self.input_dim()]],
            });
        }
        let rows = x.rows();
        let mut h = x.data().to_vec();
        for layer in 0..self.layers() {
            let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let w = self.params.value(2 * layer);
            let b = self.params.value(2 * layer + 1);
            let mut z = vec![0.0; rows * fan_out];
            kernels::matmul(&h, w.data(), rows, fan_in, fan_out, &mut z);
            kernels::add_row(&mut z, b.data());
            let act = self.activation(layer);
            z.iter_mut().for_each(|v| *v = act.apply(*v));
            h = z;
        }
        let out = Tensor::from_parts(vec![rows, self.output_dim()], h);
        if !out.is_finite() {
            return Err(Error::NonFinite { op: "mlp" });
        }
        Ok(out)
    }

    /// Single-row convenience wrapper around [`infer`](Self::infer).
    pub fn infer_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = Tensor::matrix(1, x.len(), x.to_vec())?;
        Ok(self.infer(&t)?.into_data())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeedTree, Stream};

    #[test]
    fn tape_and_inference_paths_are_bit_identical() {
        let mut rng = SeedTree::new(3).stream(Stream::Nets);
        let mlp = Mlp::new("n", &[5, 7, 3], Activation::Tanh, Activation::Sigmoid, &mut rng);
        let x = Tensor::matrix(2, 5, (0..10).map(|i| i as f64 * 0.1 - 0.4).collect()).unwrap();
        let mut tape = Tape::new();
        let b = mlp.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let y = mlp.forward(&mut tape, &b, xv).unwrap();
        assert_eq!(tape.value(y), &mlp.infer(&x).unwrap());
    }
}
