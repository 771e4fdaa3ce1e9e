//! Ensemble-based redistricting analysis over precinct dual graphs.
//!
//! The pipeline: load and clean an adjacency graph with election tallies
//! ([`graph`]), represent and check districting plans ([`partition`]),
//! sample the space of legal plans with a recombination chain ([`recom`]),
//! score plans with partisan-fairness metrics ([`metrics`]), and place an
//! enacted plan within the background distribution ([`ensemble`]).
//!
//! Every source of randomness is a seeded ChaCha8 generator; identical
//! inputs and seeds reproduce identical ensembles on any platform.

pub mod ensemble;
pub mod generators;
pub mod graph;
pub mod metrics;
pub mod partition;
pub mod recom;

pub use graph::{
    apply_cleaning, load_cleaning_script, load_graph, merge_nodes, validate_graph,
    CleaningDirective, DualGraph, ElectionTallies, GraphError, NodeRecord, ValidationReport,
};
pub use partition::{
    check_legality, county_splits, is_contiguous, population_deviation, Assignment,
    CountySplitReport, LegalityConfig, LegalityReport, PartitionError,
};
pub use recom::{
    balanced_cut_edges, chain_rng, random_spanning_tree, recom_step, run_chain, seed_plan,
    ChainConfig, ChainError, ChainRng, CutEdge, PlanSink, RunSummary, SpanningTree,
};
