//! Continuous extrapolated generation: the synthetic task, Gaussian
//! likelihood models, a diffusion prior, guided generation, latent recovery
//! and two-sample metrics.

pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod fit;
pub mod generation;
pub mod latent;
pub mod likelihood;
pub mod nn;
pub mod norm;

pub use error::{CoreError, Result};
