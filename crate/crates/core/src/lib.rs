//! Simulation and numerical verification of anisotropic pure-jump processes whose
//! axis-aligned jump kernels are comparable to `J^φ` for a weak-scaling function φ.

pub mod error;
pub mod kernels;
pub mod ladder;
pub mod quad;
pub mod scaling;
pub mod simulate;
pub mod stats;
pub mod verify;
pub mod cli;

pub use error::{Error, Result};
pub use scaling::ScalingFunction;
