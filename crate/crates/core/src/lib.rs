//! Pre-training entity embeddings on feature graphs, with fine-tuning
//! recommenders and ranking evaluation.
//!
//! The crate builds user/user and item/item graphs from side information,
//! pre-trains entity embeddings on them with graph-convolutional encoders
//! under an interaction loss, transfers the embeddings into standard
//! recommenders (matrix factorization, a two-branch neural model, a
//! propagation-only graph model) and evaluates ranking quality over seeded
//! sampled candidate sets.
//!
//! The numeric core under [`num`] is generic over the scalar type; the
//! pipeline runs at f64 through the aliases below.

pub mod data;
pub mod error;
pub mod eval;
pub mod finetune;
pub mod graph;
pub mod num;
pub mod pretrain;
pub mod run;

pub use error::{Error, Result};

/// Scalar precision used by the pipeline.
pub type Real = f64;
/// Dense matrix at pipeline precision.
pub type Tensor = num::Tensor2<Real>;
/// Trainable parameter at pipeline precision.
pub type Param = num::Parameter<Real>;
/// Sparse matrix at pipeline precision.
pub type Sparse = num::CsrMatrix<Real>;
/// Gradient tape at pipeline precision.
pub type GradTape = num::Tape<Real>;
