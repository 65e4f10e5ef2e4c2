//! Typed entity graphs built from shared categorical feature values.
//!
//! One relation exists per (feature column, category value); two entities
//! sharing that value are linked by an edge of that relation, so pairs
//! sharing several values carry parallel edges of distinct relations. The
//! edge set is closed under inverse relations and carries one self-loop
//! edge per node under a dedicated relation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{ColumnKind, Features};
use crate::error::{Error, Result};
use crate::num::RngStream;

/// A directed typed edge; the message flows src -> dst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TypedEdge {
    pub src: u32,
    pub dst: u32,
    pub rel: u32,
}

/// Catalogue entry of one base relation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationDef {
    pub column: usize,
    pub value: f64,
}

/// Direction bucket of an extended relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationDirection {
    Original,
    Inverse,
    SelfLoop,
}

/// Multi-relational graph over one entity side.
///
/// Extended relation ids are laid out as: `0..b` original relations,
/// `b..2b` their inverses (`r + b` inverts `r`), and `2b` the self-loop
/// relation, so there are `2b + 1` extended relations in total.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRelGraph {
    n_nodes: usize,
    relations: Vec<RelationDef>,
    base_edges: Vec<TypedEdge>,
    extended_edges: Vec<TypedEdge>,
}

impl MultiRelGraph {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of base relations (before inverse/self-loop extension).
    pub fn n_base_relations(&self) -> usize {
        self.relations.len()
    }

    /// Number of extended relations: 2 * base + 1.
    pub fn n_extended_relations(&self) -> usize {
        2 * self.relations.len() + 1
    }

    pub fn relations(&self) -> &[RelationDef] {
        &self.relations
    }

    /// Base edges, one per unordered entity pair and shared value (src < dst).
    pub fn base_edges(&self) -> &[TypedEdge] {
        &self.base_edges
    }

    /// Closure of the base edges under inverses plus per-node self-loops.
    pub fn extended_edges(&self) -> &[TypedEdge] {
        &self.extended_edges
    }

    pub fn self_loop_rel(&self) -> u32 {
        2 * self.relations.len() as u32
    }

    /// Involution on extended relation ids.
    pub fn inverse_rel(&self, rel: u32) -> u32 {
        let b = self.relations.len() as u32;
        match rel {
            r if r < b => r + b,
            r if r < 2 * b => r - b,
            _ => rel, // self-loop is its own inverse
        }
    }

    pub fn direction(&self, rel: u32) -> RelationDirection {
        let b = self.relations.len() as u32;
        if rel < b {
            RelationDirection::Original
        } else if rel < 2 * b {
            RelationDirection::Inverse
        } else {
            RelationDirection::SelfLoop
        }
    }

    /// Re-applies the inverse/self-loop closure. Idempotent: the edge set
    /// is already closed, so this returns an equal graph.
    pub fn extend(&self) -> MultiRelGraph {
        let extended = close_edges(
            &self.extended_edges,
            self.relations.len(),
            self.n_nodes,
            |r| self.inverse_rel(r),
            self.self_loop_rel(),
        );
        MultiRelGraph {
            n_nodes: self.n_nodes,
            relations: self.relations.clone(),
            base_edges: self.base_edges.clone(),
            extended_edges: extended,
        }
    }

    /// Builds a graph directly from base typed edges (src < dst, base
    /// relation ids), applying the extension.
    pub fn from_base_edges(
        n_nodes: usize,
        relations: Vec<RelationDef>,
        base_edges: Vec<TypedEdge>,
    ) -> Self {
        let b = relations.len() as u32;
        let inverse = move |r: u32| {
            if r < b {
                r + b
            } else if r < 2 * b {
                r - b
            } else {
                r
            }
        };
        let extended = close_edges(&base_edges, relations.len(), n_nodes, inverse, 2 * b);
        Self {
            n_nodes,
            relations,
            base_edges,
            extended_edges: extended,
        }
    }

    /// TSV dump of the base edges: `i<TAB>j<TAB>relation_id`.
    pub fn dump_edges(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.base_edges {
            writeln!(out, "{}\t{}\t{}", e.src, e.dst, e.rel).expect("string write");
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// TSV dump of the base relation catalogue:
    /// `relation_id<TAB>column<TAB>value`.
    pub fn dump_relations(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (r, def) in self.relations.iter().enumerate() {
            writeln!(out, "{r}\t{}\t{}", def.column, def.value).expect("string write");
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Closes an edge set under inverses and per-node self-loops, deduplicating.
fn close_edges(
    edges: &[TypedEdge],
    _n_base: usize,
    n_nodes: usize,
    inverse: impl Fn(u32) -> u32,
    self_loop: u32,
) -> Vec<TypedEdge> {
    let mut set: BTreeSet<TypedEdge> = BTreeSet::new();
    for &e in edges {
        set.insert(e);
        set.insert(TypedEdge {
            src: e.dst,
            dst: e.src,
            rel: inverse(e.rel),
        });
    }
    for u in 0..n_nodes as u32 {
        set.insert(TypedEdge {
            src: u,
            dst: u,
            rel: self_loop,
        });
    }
    set.into_iter().collect()
}

/// Builds the multi-relational graph of one entity side from categorical
/// features. Every real-valued column is rejected; categorize it first.
/// With `per_relation_cap`, each node keeps at most `cap` uniformly sampled
/// partners per relation and a pair survives if either endpoint kept it.
pub fn build_multi_rel_graph(
    features: &Features,
    per_relation_cap: Option<usize>,
    rng: &mut RngStream,
) -> Result<MultiRelGraph> {
    for c in 0..features.n_features() {
        if features.kind(c) == ColumnKind::Real {
            return Err(Error::Config(format!(
                "column {c} is real-valued; categorize it before building the multi-relational graph"
            )));
        }
    }
    let n = features.n_entities();

    // relation per (column, distinct nonzero value), columns then values
    // ascending, so ids are deterministic
    let mut relations: Vec<RelationDef> = Vec::new();
    let mut groups: Vec<Vec<u32>> = Vec::new();
    for c in 0..features.n_features() {
        let mut values: Vec<f64> = (0..n)
            .map(|e| features.values().get(e, c))
            .filter(|&v| v != 0.0)
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
        values.dedup();
        for v in values {
            let members: Vec<u32> = (0..n as u32)
                .filter(|&e| features.values().get(e as usize, c) == v)
                .collect();
            if members.len() >= 2 {
                relations.push(RelationDef { column: c, value: v });
                groups.push(members);
            }
        }
    }

    let mut base_edges: Vec<TypedEdge> = Vec::new();
    for (rel, members) in groups.iter().enumerate() {
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                pairs.push((i, j));
            }
        }
        if let Some(cap) = per_relation_cap {
            pairs = cap_pairs(&pairs, members, cap, rng);
        }
        base_edges.extend(pairs.into_iter().map(|(i, j)| TypedEdge {
            src: i,
            dst: j,
            rel: rel as u32,
        }));
    }

    Ok(MultiRelGraph::from_base_edges(n, relations, base_edges))
}

/// Keeps, per node, at most `cap` uniformly sampled partners; a pair
/// survives when either endpoint selected it.
fn cap_pairs(
    pairs: &[(u32, u32)],
    members: &[u32],
    cap: usize,
    rng: &mut RngStream,
) -> Vec<(u32, u32)> {
    use std::collections::{HashMap, HashSet};
    let mut incident: HashMap<u32, Vec<usize>> = HashMap::new();
    for (k, &(i, j)) in pairs.iter().enumerate() {
        incident.entry(i).or_default().push(k);
        incident.entry(j).or_default().push(k);
    }
    let mut kept: HashSet<usize> = HashSet::new();
    for &node in members {
        let Some(inc) = incident.get(&node) else { continue };
        if inc.len() <= cap {
            kept.extend(inc.iter().copied());
        } else {
            for s in rng.sample_distinct(inc.len(), cap) {
                kept.insert(inc[s]);
            }
        }
    }
    let mut kept: Vec<usize> = kept.into_iter().collect();
    kept.sort_unstable();
    kept.into_iter().map(|k| pairs[k]).collect()
}

/// Zeroes a uniformly sampled `ceil(ratio * k)` subset of feature columns
/// across all entities. Used by the feature-dropout ablation; the same
/// columns must be dropped for every graph built in that run.
pub fn drop_features(features: &Features, ratio: f64, rng: &mut RngStream) -> Result<Features> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!("feature dropout ratio {ratio} not in [0, 1)")));
    }
    if ratio == 0.0 {
        return Ok(features.clone());
    }
    let k = features.n_features();
    let n_drop = ((ratio * k as f64).ceil() as usize).min(k);
    let dropped = rng.sample_distinct(k, n_drop);
    let mut values = features.values().clone();
    for &c in &dropped {
        for r in 0..features.n_entities() {
            values.set(r, c, 0.0);
        }
    }
    Ok(Features::new(values, features.kinds().to_vec()))
}
