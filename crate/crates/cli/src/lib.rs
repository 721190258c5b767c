//! Experiment harness: run configs, an artifact store with a hashed
//! manifest, the pipeline stages, and the `xgen` verbs.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod exact_demo;
pub mod latent_demo;
pub mod pipeline;
pub mod store;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use store::Store;
