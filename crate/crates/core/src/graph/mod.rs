//! Feature graphs: cosine-weighted single-relational graphs and typed
//! multi-relational graphs, plus the feature-dropout transform.

mod multi;
mod single;

pub use multi::{
    build_multi_rel_graph, drop_features, MultiRelGraph, RelationDef, RelationDirection,
    TypedEdge,
};
pub use single::{build_single_rel_graph, cosine_similarity, normalize_adjacency, SingleRelGraph};
