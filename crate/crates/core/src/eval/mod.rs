//! Ranking metrics, multi-seed stability statistics and experiment drivers.

mod metrics;

pub use metrics::{
    evaluate, evaluate_set, map_at_k, ndcg_at_k, rank_candidates, recall_at_k, EvalOutcome,
    Metric, MetricGrid, RankedList, SetEval,
};
