//! Ranking metrics over sampled candidate sets.
//!
//! Leave-one-out evaluation holds out a single relevant item per user, so
//! the metrics take their single-relevant forms: NDCG collapses to
//! 1/log2(rank+1), Recall to a hit indicator and MAP to the reciprocal
//! rank, all zero outside the cut-off.

use crate::data::EvalCandidateSet;
use crate::error::{Error, Result};

/// Ranking of one user's candidates, descending by score with exact ties
/// broken by ascending item index.
#[derive(Debug, Clone)]
pub struct RankedList {
    pub items: Vec<u32>,
    /// 1-based position of the held-out positive.
    pub positive_rank: usize,
}

/// Sorts candidates by score and locates the positive. `scores[i]` belongs
/// to `items[i]`; the positive must be among the items.
pub fn rank_candidates(
    scores: &[f64],
    items: &[u32],
    positive: u32,
    user: u32,
) -> Result<RankedList> {
    assert_eq!(scores.len(), items.len(), "one score per candidate");
    if let Some(k) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Eval(format!(
            "NaN score for user {user} on candidate item {}",
            items[k]
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("no NaN after the check")
            .then(items[a].cmp(&items[b]))
    });
    let ranked: Vec<u32> = order.iter().map(|&i| items[i]).collect();
    let positive_rank = ranked
        .iter()
        .position(|&i| i == positive)
        .map(|p| p + 1)
        .ok_or_else(|| Error::Eval(format!("positive item {positive} missing from candidates of user {user}")))?;
    Ok(RankedList {
        items: ranked,
        positive_rank,
    })
}

/// 1/log2(rank+1) within the cut-off, else 0 (single relevant item, IDCG=1).
pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    assert!(rank >= 1, "ranks are 1-based");
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// Hit indicator within the cut-off.
pub fn recall_at_k(rank: usize, k: usize) -> f64 {
    assert!(rank >= 1, "ranks are 1-based");
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

/// Reciprocal rank within the cut-off (average precision with one
/// relevant item).
pub fn map_at_k(rank: usize, k: usize) -> f64 {
    assert!(rank >= 1, "ranks are 1-based");
    if rank <= k {
        1.0 / rank as f64
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ndcg,
    Recall,
    Map,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Ndcg, Metric::Recall, Metric::Map];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Ndcg => "ndcg",
            Metric::Recall => "recall",
            Metric::Map => "map",
        }
    }

    pub fn at(&self, rank: usize, k: usize) -> f64 {
        match self {
            Metric::Ndcg => ndcg_at_k(rank, k),
            Metric::Recall => recall_at_k(rank, k),
            Metric::Map => map_at_k(rank, k),
        }
    }
}

/// Mean metric values over users, per (metric, cut-off).
#[derive(Debug, Clone)]
pub struct MetricGrid {
    cutoffs: Vec<usize>,
    /// indexed \[metric\]\[cutoff\]
    values: Vec<Vec<f64>>,
}

impl MetricGrid {
    fn zeros(cutoffs: &[usize]) -> Self {
        Self {
            cutoffs: cutoffs.to_vec(),
            values: vec![vec![0.0; cutoffs.len()]; Metric::ALL.len()],
        }
    }

    /// Mean metric values computed from 1-based positive ranks.
    pub fn from_ranks(ranks: &[usize], cutoffs: &[usize]) -> Self {
        let mut grid = Self::zeros(cutoffs);
        if ranks.is_empty() {
            return grid;
        }
        for (mi, m) in Metric::ALL.iter().enumerate() {
            for (ki, &k) in cutoffs.iter().enumerate() {
                let sum: f64 = ranks.iter().map(|&r| m.at(r, k)).sum();
                grid.values[mi][ki] = sum / ranks.len() as f64;
            }
        }
        grid
    }

    /// Arithmetic mean of several grids over the same cut-offs.
    pub fn mean_of(grids: &[MetricGrid]) -> Self {
        assert!(!grids.is_empty(), "mean of no grids");
        let mut out = Self::zeros(&grids[0].cutoffs);
        for g in grids {
            assert_eq!(g.cutoffs, out.cutoffs, "cut-off mismatch");
            for mi in 0..out.values.len() {
                for ki in 0..out.cutoffs.len() {
                    out.values[mi][ki] += g.values[mi][ki];
                }
            }
        }
        let n = grids.len() as f64;
        for row in &mut out.values {
            for v in row {
                *v /= n;
            }
        }
        out
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn get(&self, metric: Metric, k: usize) -> f64 {
        let mi = Metric::ALL.iter().position(|m| *m == metric).expect("known metric");
        let ki = self
            .cutoffs
            .iter()
            .position(|&c| c == k)
            .unwrap_or_else(|| panic!("cut-off {k} was not evaluated"));
        self.values[mi][ki]
    }
}

/// One candidate set evaluated: per-user positive ranks plus the means.
#[derive(Debug, Clone)]
pub struct SetEval {
    pub seed: u64,
    /// (user, 1-based rank of the positive)
    pub ranks: Vec<(u32, usize)>,
    pub grid: MetricGrid,
}

/// Scores one candidate set with `scorer(user, item)` and computes the
/// per-user ranks and mean metrics.
pub fn evaluate_set<F>(
    scorer: &F,
    set: &EvalCandidateSet,
    cutoffs: &[usize],
    n_items: usize,
) -> Result<SetEval>
where
    F: Fn(u32, u32) -> f64,
{
    let mut ranks = Vec::with_capacity(set.users.len());
    for u in &set.users {
        let mut items = Vec::with_capacity(1 + u.negatives.len());
        items.push(u.positive);
        items.extend_from_slice(&u.negatives);
        for &i in &items {
            if i as usize >= n_items {
                return Err(Error::Eval(format!(
                    "candidate item {i} outside the item range for user {}",
                    u.user
                )));
            }
        }
        let scores: Vec<f64> = items.iter().map(|&i| scorer(u.user, i)).collect();
        let ranked = rank_candidates(&scores, &items, u.positive, u.user)?;
        ranks.push((u.user, ranked.positive_rank));
    }
    let rank_values: Vec<usize> = ranks.iter().map(|&(_, r)| r).collect();
    Ok(SetEval {
        seed: set.seed,
        ranks,
        grid: MetricGrid::from_ranks(&rank_values, cutoffs),
    })
}

/// Full evaluation outcome over several candidate sets.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub cutoffs: Vec<usize>,
    pub per_set: Vec<SetEval>,
    pub averaged: MetricGrid,
}

/// Evaluates every candidate set and averages the per-set means.
pub fn evaluate<F>(
    scorer: &F,
    sets: &[EvalCandidateSet],
    cutoffs: &[usize],
    n_items: usize,
) -> Result<EvalOutcome>
where
    F: Fn(u32, u32) -> f64,
{
    if sets.is_empty() {
        return Err(Error::Config("no evaluation candidate sets".into()));
    }
    let per_set: Vec<SetEval> = sets
        .iter()
        .map(|s| evaluate_set(scorer, s, cutoffs, n_items))
        .collect::<Result<_>>()?;
    let grids: Vec<MetricGrid> = per_set.iter().map(|s| s.grid.clone()).collect();
    Ok(EvalOutcome {
        cutoffs: cutoffs.to_vec(),
        per_set,
        averaged: MetricGrid::mean_of(&grids),
    })
}
