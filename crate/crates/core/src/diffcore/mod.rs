//! Dense reverse-mode automatic differentiation.
//!
//! A [`Tape`] records primitive ops on row-major `f64` [`Tensor`]s; calling
//! [`Tape::backward`] on a scalar node walks the record in reverse and
//! returns the gradient of every node that requires one. Parameters live in
//! a [`ParameterSet`] and enter a tape through [`ParameterSet::bind`].

mod gradcheck;
pub mod kernels;
mod mlp;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheck};
pub use mlp::{Activation, BoundMlp, Mlp};
pub use params::{AdamConfig, ParamEntry, ParameterSet};
pub use tape::{Gradients, OpKind, Tape, Var};
pub use tensor::Tensor;
