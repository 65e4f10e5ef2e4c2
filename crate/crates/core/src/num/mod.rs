//! Numeric core: dense tensors, seeded randomness, a reverse-mode gradient
//! tape, Adam, dropout and a finite-difference gradient checker.
//!
//! Everything here is generic over the [`Scalar`] type; the pipeline modules
//! use the f64 aliases exported at the crate root.

mod adam;
mod dropout;
mod gradcheck;
mod rng;
mod scalar;
mod sparse;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState, Optimizer, Parameter};
pub use dropout::{apply_dropout, dropout_mask};
pub use gradcheck::finite_difference_check;
pub use rng::RngStream;
pub use scalar::{logistic, relu, softplus, Scalar};
pub use sparse::CsrMatrix;
pub use tape::{Gradients, SparseOp, Tape, VarId};
pub use tensor::Tensor2;
