//! Negative sampling for evaluation candidate sets and training batches.

use super::interactions::{Interactions, Split};
use crate::error::{Error, Result};
use crate::num::RngStream;

/// Candidates of one user: the held-out positive plus sampled negatives.
#[derive(Debug, Clone)]
pub struct EvalUser {
    pub user: u32,
    pub positive: u32,
    pub negatives: Vec<u32>,
    /// True when the user had fewer eligible negatives than requested.
    pub truncated: bool,
}

/// One seeded evaluation candidate set over all eval-included users.
#[derive(Debug, Clone)]
pub struct EvalCandidateSet {
    pub seed: u64,
    pub users: Vec<EvalUser>,
}

impl EvalCandidateSet {
    pub fn truncated_user_count(&self) -> usize {
        self.users.iter().filter(|u| u.truncated).count()
    }
}

/// Builds `n_sets` candidate sets for the given held-out split; set `i`
/// is seeded `base_seed + i`. Negatives are sampled uniformly without
/// replacement from the items the user never interacted with in any split.
/// Users with fewer eligible items than `n_eval` keep them all and are
/// flagged truncated.
pub fn build_eval_sets(
    data: &Interactions,
    split: Split,
    n_sets: usize,
    n_eval: usize,
    base_seed: u64,
) -> Result<Vec<EvalCandidateSet>> {
    if !data.is_split() {
        return Err(Error::Config("interactions must be split before building eval sets".into()));
    }
    if split == Split::Train {
        return Err(Error::Config("eval sets target the validation or test split".into()));
    }
    if n_sets == 0 || n_eval == 0 {
        return Err(Error::Config("n_sets and n_eval must be >= 1".into()));
    }
    let n_items = data.n_items();
    let mut sets = Vec::with_capacity(n_sets);
    for s in 0..n_sets {
        let seed = base_seed + s as u64;
        let mut rng = RngStream::new(seed);
        let mut users = Vec::new();
        for u in 0..data.n_users() as u32 {
            if data.is_eval_excluded(u) {
                continue;
            }
            let positive = data
                .held_out(u, split)
                .ok_or_else(|| Error::Data(format!("user {u} lacks a {split:?} entry")))?;
            let eligible = n_items - data.interacted_count(u);
            let (negatives, truncated) = if eligible <= n_eval {
                // forced set: enumerate the whole complement
                let negs: Vec<u32> = (0..n_items as u32)
                    .filter(|&i| !data.has_interacted(u, i))
                    .collect();
                let truncated = negs.len() < n_eval;
                (negs, truncated)
            } else {
                let mut chosen = std::collections::HashSet::with_capacity(n_eval);
                let mut negs = Vec::with_capacity(n_eval);
                while negs.len() < n_eval {
                    let i = rng.index(n_items) as u32;
                    if data.has_interacted(u, i) || !chosen.insert(i) {
                        continue;
                    }
                    negs.push(i);
                }
                (negs, false)
            };
            users.push(EvalUser {
                user: u,
                positive,
                negatives,
                truncated,
            });
        }
        sets.push(EvalCandidateSet { seed, users });
    }
    Ok(sets)
}

/// A batch of (user, item, label) triples. Each positive is immediately
/// followed by its sampled negatives, so pairwise losses can re-group them.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub triples: Vec<(u32, u32, f64)>,
    pub negatives_per_positive: usize,
}

impl TrainBatch {
    pub fn positive_count(&self) -> usize {
        self.triples.iter().filter(|t| t.2 == 1.0).count()
    }

    /// (user, positive item, negative item) pairs for pairwise losses.
    pub fn pairs(&self) -> Vec<(u32, u32, u32)> {
        let mut out = Vec::new();
        let mut current: Option<(u32, u32)> = None;
        for &(u, i, y) in &self.triples {
            if y == 1.0 {
                current = Some((u, i));
            } else if let Some((cu, ci)) = current {
                debug_assert_eq!(cu, u, "negative not grouped with its positive");
                out.push((cu, ci, i));
            }
        }
        out
    }
}

/// One epoch of training batches: the train positives are shuffled, chunked
/// so that each batch holds ~`batch_triples` triples, and every positive is
/// paired with `negatives_per_positive` uniform negatives that avoid the
/// user's train positives.
pub fn epoch_batches(
    data: &Interactions,
    batch_triples: usize,
    negatives_per_positive: usize,
    rng: &mut RngStream,
) -> Result<Vec<TrainBatch>> {
    if !data.is_split() {
        return Err(Error::Config("interactions must be split before batching".into()));
    }
    if negatives_per_positive == 0 {
        return Err(Error::Config("negatives_per_positive must be >= 1".into()));
    }
    if batch_triples == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let mut order = data.train_entry_indices();
    rng.shuffle(&mut order);

    let per_batch = (batch_triples / (1 + negatives_per_positive)).max(1);
    let n_items = data.n_items();
    let mut batches = Vec::new();
    for chunk in order.chunks(per_batch) {
        let mut triples = Vec::with_capacity(chunk.len() * (1 + negatives_per_positive));
        for &k in chunk {
            let e = data.entries()[k];
            triples.push((e.user, e.item, 1.0));
            let avail = n_items - data.train_positive_count(e.user);
            if avail == 0 {
                return Err(Error::Data(format!(
                    "user {} has no non-train item to sample negatives from",
                    e.user
                )));
            }
            for _ in 0..negatives_per_positive {
                loop {
                    let i = rng.index(n_items) as u32;
                    if !data.is_train_positive(e.user, i) {
                        triples.push((e.user, i, 0.0));
                        break;
                    }
                }
            }
        }
        batches.push(TrainBatch {
            triples,
            negatives_per_positive,
        });
    }
    Ok(batches)
}
