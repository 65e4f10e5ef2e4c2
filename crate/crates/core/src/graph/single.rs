//! Cosine-weighted entity graphs with symmetric normalization.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::data::Features;
use crate::error::{Error, Result};
use crate::num::SparseOp;
use crate::{Real, Sparse};

/// Tolerance for the symmetry check of adjacency inputs.
const SYMMETRY_TOL: f64 = 1e-12;

/// Weighted similarity graph over one entity side, with both the raw
/// adjacency and its normalized propagation operator.
#[derive(Debug, Clone)]
pub struct SingleRelGraph {
    n_nodes: usize,
    adjacency: Sparse,
    normalized: Arc<SparseOp<Real>>,
    threshold: f64,
}

impl SingleRelGraph {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Raw symmetric adjacency (zero diagonal, weights above the threshold).
    pub fn adjacency(&self) -> &Sparse {
        &self.adjacency
    }

    /// Normalized propagation operator, ready for sparse products on a tape.
    pub fn normalized(&self) -> &Arc<SparseOp<Real>> {
        &self.normalized
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn edge_count_undirected(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Graph with no edges: the normalized operator degenerates to identity.
    pub fn edgeless(n_nodes: usize) -> Self {
        let adjacency = Sparse::from_triplets(n_nodes, n_nodes, &[]);
        let normalized = Arc::new(SparseOp::new(Sparse::identity(n_nodes)));
        Self {
            n_nodes,
            adjacency,
            normalized,
            threshold: 0.0,
        }
    }

    /// TSV dump of the undirected edges: `i<TAB>j<TAB>weight` with i < j.
    pub fn dump_edges(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.n_nodes {
            for (j, w) in self.adjacency.row_entries(i) {
                if (j as usize) > i {
                    writeln!(out, "{i}\t{j}\t{w:.17e}").expect("string write");
                }
            }
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Cosine of two equal-length non-negative vectors; 0 when either norm
/// vanishes.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "cosine on vectors of different lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: f64 = a.iter().map(|&x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&y| y * y).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Symmetric normalization of a weighted adjacency: with self-loops added,
/// each entry is divided by the square roots of both endpoint degrees.
pub fn normalize_adjacency(a: &Sparse) -> Result<Sparse> {
    if a.rows() != a.cols() {
        return Err(Error::Data(format!(
            "adjacency must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::Data(format!(
            "adjacency asymmetric beyond tolerance: max |A - A^T| = {asym:e}"
        )));
    }
    let n = a.rows();
    let mut degree = vec![1.0f64; n]; // self-loop contributes 1 to every row
    for i in 0..n {
        for (j, w) in a.row_entries(i) {
            if j as usize == i {
                return Err(Error::Data(format!("adjacency has a diagonal entry at {i}")));
            }
            if w < 0.0 {
                return Err(Error::Data(format!(
                    "adjacency has a negative weight {w} at ({i}, {j})"
                )));
            }
            degree[i] += w;
        }
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| 1.0 / d.sqrt()).collect();
    let mut triplets = Vec::with_capacity(a.nnz() + n);
    for i in 0..n {
        triplets.push((i as u32, i as u32, inv_sqrt[i] * inv_sqrt[i]));
        for (j, w) in a.row_entries(i) {
            triplets.push((i as u32, j, w * inv_sqrt[i] * inv_sqrt[j as usize]));
        }
    }
    Ok(Sparse::from_triplets(n, n, &triplets))
}

/// Builds the similarity graph over all entity pairs whose cosine weight
/// strictly exceeds the threshold, then normalizes it.
pub fn build_single_rel_graph(features: &Features, threshold: f64) -> Result<SingleRelGraph> {
    if threshold < 0.0 {
        return Err(Error::Config(format!("similarity threshold {threshold} must be >= 0")));
    }
    let n = features.n_entities();
    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = cosine_similarity(features.row(i), features.row(j))?;
            if w > threshold {
                triplets.push((i as u32, j as u32, w));
                triplets.push((j as u32, i as u32, w));
            }
        }
    }
    let adjacency = Sparse::from_triplets(n, n, &triplets);
    let normalized = Arc::new(SparseOp::new(normalize_adjacency(&adjacency)?));
    Ok(SingleRelGraph {
        n_nodes: n,
        adjacency,
        normalized,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnKind;
    use crate::num::RngStream;
    use crate::Tensor;

    fn feats(rows: &[Vec<f64>]) -> Features {
        let k = rows[0].len();
        Features::new(Tensor::from_rows(rows), vec![ColumnKind::Binary; k])
    }

    #[test]
    fn cosine_hand_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let same = cosine_similarity(&[2.0, 3.0], &[2.0, 3.0]).unwrap();
        assert!((same - 1.0).abs() < 1e-15);
        let v = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v - 0.70710678).abs() < 1e-8);
    }

    #[test]
    fn cosine_zero_norm_and_mismatch() {
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cosine_symmetry_and_scale_invariance() {
        let mut rng = RngStream::new(17);
        for _ in 0..50 {
            let a: Vec<f64> = (0..6).map(|_| rng.uniform(0.0, 2.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.uniform(0.0, 2.0)).collect();
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-15);
            let scaled: Vec<f64> = a.iter().map(|&x| 3.5 * x).collect();
            let sab = cosine_similarity(&scaled, &b).unwrap();
            assert!((ab - sab).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_features_give_identity_operator() {
        let f = Features::zeros(4, 3);
        let g = build_single_rel_graph(&f, 0.0).unwrap();
        assert_eq!(g.edge_count_undirected(), 0);
        let norm = g.normalized().matrix().to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(norm.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn two_identical_nodes() {
        let f = feats(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let g = build_single_rel_graph(&f, 0.0).unwrap();
        let a = g.adjacency().to_dense();
        assert!((a.get(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(a.get(0, 0), 0.0);
        let norm = g.normalized().matrix().to_dense();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((norm.get(i, j) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn threshold_keeps_only_strong_edges() {
        let mut rng = RngStream::new(5);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..4).map(|_| rng.uniform(0.0, 1.0)).collect())
            .collect();
        let f = feats(&rows);
        let g = build_single_rel_graph(&f, 0.9).unwrap();
        // brute-force recheck of every retained edge
        for i in 0..12 {
            for (j, w) in g.adjacency().row_entries(i) {
                let c = cosine_similarity(&rows[i], &rows[j as usize]).unwrap();
                assert!(c > 0.9);
                assert!((c - w).abs() < 1e-15);
            }
        }
        // and no qualifying pair was dropped
        let kept = g.edge_count_undirected();
        let want = (0..12)
            .flat_map(|i| (i + 1..12).map(move |j| (i, j)))
            .filter(|&(i, j)| cosine_similarity(&rows[i], &rows[j]).unwrap() > 0.9)
            .count();
        assert_eq!(kept, want);
    }

    #[test]
    fn normalize_path_graph_matches_scripted_oracle() {
        // 3-node path with unit weights; oracle computed densely
        let a = Sparse::from_triplets(
            3,
            3,
            &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
        );
        let norm = normalize_adjacency(&a).unwrap().to_dense();

        // independent dense evaluation
        let mut plus = a.to_dense();
        for i in 0..3 {
            plus.set(i, i, 1.0);
        }
        let deg: Vec<f64> = (0..3).map(|i| plus.row(i).iter().sum()).collect();
        for i in 0..3 {
            for j in 0..3 {
                let want = plus.get(i, j) / (deg[i].sqrt() * deg[j].sqrt());
                assert!((norm.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn walk_normalization_cross_check() {
        // rows of D^-1 (A+I) sum to one: the stochastic-matrix sanity check
        let a = Sparse::from_triplets(
            4,
            4,
            &[(0, 1, 0.5), (1, 0, 0.5), (2, 3, 2.0), (3, 2, 2.0), (0, 3, 1.0), (3, 0, 1.0)],
        );
        let mut plus = a.to_dense();
        for i in 0..4 {
            plus.set(i, i, 1.0);
        }
        for i in 0..4 {
            let d: f64 = plus.row(i).iter().sum();
            let rowsum: f64 = plus.row(i).iter().map(|v| v / d).sum();
            assert!((rowsum - 1.0).abs() < 1e-12);
        }
        // and the symmetric form stays symmetric
        let norm = normalize_adjacency(&a).unwrap();
        assert!(norm.max_asymmetry() < 1e-15);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let a = Sparse::from_triplets(2, 2, &[(0, 1, 1.0)]);
        assert!(matches!(normalize_adjacency(&a), Err(Error::Data(_))));
        let diag = Sparse::from_triplets(2, 2, &[(0, 0, 1.0)]);
        assert!(normalize_adjacency(&diag).is_err());
    }
}
