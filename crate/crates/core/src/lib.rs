//! Allocation-only core of the RILIR robust visual imitation learning engine.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every learned and
//! simulated component:
//!
//! - [`diffcore`]: dense tensors, a reverse-mode tape, MLPs, Adam and a
//!   finite-difference gradient checker.
//! - [`envsim`]: deterministic toy pixel environments, visual perturbations
//!   and scripted experts.
//! - [`repr`]: the pixel encoder, the inverse dynamics model, the periodically
//!   synchronised target encoder and saliency maps.
//! - [`reward`]: optimal-transport trajectory matching rewards, the
//!   discriminator reward and their combination.
//! - [`agent`]: TD3 with behaviour-cloning initialisation, the replay buffer
//!   and the end-to-end training loop.
//!
//! File formats, CSV logs, configuration text and the CLI live in the std
//! companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agent;
pub mod diffcore;
pub mod envsim;
mod error;
pub mod math;
pub mod repr;
pub mod reward;
pub mod rng;

pub use error::{Error, Result};
