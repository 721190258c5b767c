//! Numeric substrate for the extrapolated-generation pipeline: dense tensors,
//! tape-based reverse-mode differentiation, Adam, and reproducible random
//! streams.

pub mod check;
pub mod error;
pub mod optim;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{NumericsError, Result};
pub use optim::{Adam, AdamConfig};
pub use rng::{derive_seed, Rng};
pub use tape::{grad, value_and_grad, Gradients, Tape, Var};
pub use tensor::{kernels, Tensor};
