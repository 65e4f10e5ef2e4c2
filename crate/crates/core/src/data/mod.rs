//! Data ingestion: interactions, side-information features, leave-one-out
//! splitting and seeded negative sampling.

mod features;
mod interactions;
mod sampling;
pub mod synthetic;

pub use features::{categorize_real_feature, ColumnKind, Features};
pub use interactions::{Entry, IndexMap, Interactions, LoadedInteractions, Split};
pub use sampling::{build_eval_sets, epoch_batches, EvalCandidateSet, EvalUser, TrainBatch};
