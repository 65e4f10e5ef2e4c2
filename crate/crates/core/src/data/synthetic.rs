//! Synthetic cluster datasets for smoke tests and directional experiments.

use super::features::{ColumnKind, Features};
use super::interactions::{IndexMap, Interactions};
use crate::num::RngStream;
use crate::Tensor;

/// Generator settings: users and items live in shared clusters; features
/// are the cluster one-hot plus random binary noise columns; interactions
/// appear mostly within clusters.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_clusters: usize,
    pub noise_cols: usize,
    /// Interaction probability for same-cluster pairs.
    pub p_within: f64,
    /// Interaction probability for cross-cluster pairs.
    pub p_cross: f64,
    /// Probability that a noise feature bit is set.
    pub noise_density: f64,
}

impl ClusterSpec {
    /// The generator used by the directional experiments: 200x200 entities,
    /// 10 clusters, 5 noise columns, 30% within-cluster and 2% cross-cluster
    /// interaction probability.
    pub fn standard() -> Self {
        Self {
            n_users: 200,
            n_items: 200,
            n_clusters: 10,
            noise_cols: 5,
            p_within: 0.3,
            p_cross: 0.02,
            noise_density: 0.5,
        }
    }

    /// Tiny 20x20 two-cluster variant bundled for smoke tests.
    pub fn toy() -> Self {
        Self {
            n_users: 20,
            n_items: 20,
            n_clusters: 2,
            noise_cols: 0,
            p_within: 0.5,
            p_cross: 0.05,
            noise_density: 0.5,
        }
    }
}

/// A generated dataset: unsplit interactions, per-side features, id maps.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub interactions: Interactions,
    pub user_features: Features,
    pub item_features: Features,
    pub user_ids: IndexMap,
    pub item_ids: IndexMap,
    pub user_clusters: Vec<usize>,
    pub item_clusters: Vec<usize>,
}

fn cluster_features(
    n: usize,
    n_clusters: usize,
    noise_cols: usize,
    noise_density: f64,
    clusters: &[usize],
    rng: &mut RngStream,
) -> Features {
    let k = n_clusters + noise_cols;
    let mut values = Tensor::zeros(n, k);
    for (e, &c) in clusters.iter().enumerate() {
        values.set(e, c, 1.0);
        for j in 0..noise_cols {
            if rng.unit() < noise_density {
                values.set(e, n_clusters + j, 1.0);
            }
        }
    }
    let kinds = vec![ColumnKind::Binary; k];
    Features::new(values, kinds)
}

/// Deterministic generation from a seed. Entities are assigned to clusters
/// round-robin, so every cluster holds n/n_clusters entities.
pub fn generate_cluster_dataset(spec: &ClusterSpec, seed: u64) -> SyntheticDataset {
    let base = RngStream::new(seed);
    let user_clusters: Vec<usize> = (0..spec.n_users).map(|u| u % spec.n_clusters).collect();
    let item_clusters: Vec<usize> = (0..spec.n_items).map(|i| i % spec.n_clusters).collect();

    let mut feat_rng = base.fork(1);
    let user_features = cluster_features(
        spec.n_users,
        spec.n_clusters,
        spec.noise_cols,
        spec.noise_density,
        &user_clusters,
        &mut feat_rng,
    );
    let item_features = cluster_features(
        spec.n_items,
        spec.n_clusters,
        spec.noise_cols,
        spec.noise_density,
        &item_clusters,
        &mut feat_rng,
    );

    let mut inter_rng = base.fork(2);
    let mut pairs = Vec::new();
    for u in 0..spec.n_users {
        for i in 0..spec.n_items {
            let p = if user_clusters[u] == item_clusters[i] {
                spec.p_within
            } else {
                spec.p_cross
            };
            if inter_rng.unit() < p {
                pairs.push((u as u32, i as u32));
            }
        }
    }
    let (interactions, _) = Interactions::from_pairs(spec.n_users, spec.n_items, &pairs);

    let mut user_ids = IndexMap::default();
    for u in 0..spec.n_users {
        user_ids.intern(&format!("u{u}"));
    }
    let mut item_ids = IndexMap::default();
    for i in 0..spec.n_items {
        item_ids.intern(&format!("i{i}"));
    }

    SyntheticDataset {
        interactions,
        user_features,
        item_features,
        user_ids,
        item_ids,
        user_clusters,
        item_clusters,
    }
}
