//! Reachability analysis: state-space exploration, bounds, liveness,
//! soundness and graph compression.

mod compress;
mod dot;
mod explore;
mod verdict;

pub use compress::{
    compress, compress_edges, reachability_among, CompressError, CompressedEdge, CompressedGraph, EdgeLabel,
};
pub use dot::{compressed_to_dot, reach_to_dot};
pub use explore::{explore, explore_with, Edge, ExploreError, OmegaWitness, ReachGraph, DEFAULT_BUDGET};
pub use verdict::{
    analyze, bounds, liveness, liveness_with, soundness, soundness_via_theorem1, theorem1_from_graph, AnalysisReport,
    Bound, GraphStats, Soundness, Theorem1, VerifyError, Violation,
};
