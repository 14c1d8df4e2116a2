//! File formats, configuration, experiment orchestration and the `rilir`
//! command line on top of [`rilir_core`].

pub mod codec;
pub mod config;
mod error;
pub mod logs;
pub mod pgm;
pub mod run;
pub mod sweep;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use rilir_core as core;
