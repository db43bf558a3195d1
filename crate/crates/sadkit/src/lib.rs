//! Strong arc decompositions of 2-arc-strong split digraphs.
//!
//! Given a split digraph whose vertex set partitions into an independent set
//! `V1` and a set `V2` inducing a semicomplete digraph, the solver either
//! partitions the arc set into two spanning strong subdigraphs or returns a
//! machine-checkable certificate that no such partition exists (an
//! isomorphism onto a catalog graph, or a forbidden local structure).
//!
//! The crate is organised as:
//!
//! - [`graph`]: directed multigraphs, connectivity, arc-disjoint path flow,
//!   small-graph isomorphism;
//! - [`semicomplete`]: split partitions, nice decompositions of strong
//!   semicomplete digraphs;
//! - [`search`]: the exhaustive oracle, the semicomplete-multidigraph
//!   decomposer and the decomposition verifier;
//! - [`exceptions`]: the exception catalog and certificate matchers;
//! - [`engine`]: splitting-off, critical path pairs, pending decompositions
//!   and the top-level solver;
//! - [`procedures`]: the cut-arc case machines driving the constructive
//!   search;
//! - [`io`]: edge-list and DOT formats, JSON certificates, the instance
//!   generator.

pub mod engine;
pub mod exceptions;
pub mod graph;
pub mod io;
pub mod procedures;
pub mod search;
pub mod semicomplete;

pub use engine::{solve_split, SolveError, SolveReport};
pub use graph::{ArcId, MultiDigraph, Vertex};
pub use search::{brute_force_sad, verify_decomposition, Decomposition, Outcome};
pub use semicomplete::{certify_split, SplitInstance};
