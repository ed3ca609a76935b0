//! Minimal dense tensor engine for the reasoner.
//!
//! [`Tensor`] is a row-major value type generic over [`Real`] (`f32` for
//! training, `f64` for gradient checks). Computations are recorded on a
//! [`Tape`]; [`Tape::backward`] walks it once in reverse and returns exact
//! gradients for every recorded value that depends on a trainable leaf.
//! [`Adam`] updates parameter tensors from those gradients.

mod adam;
mod error;
mod real;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use error::TensorError;
pub use real::Real;
pub use tape::{Gradients, ReduceKind, Tape, Var};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, TensorError>;
