//! Engine for the tree connection game (TCG).
//!
//! Every agent `i` owns node `i + 1` of a complete directed host graph and
//! activates exactly one out-edge; node `0` is the common root. The cost of an
//! edge `(u, v)` is the in-degree of `v`, shared fairly by every agent routing
//! through `u`. All cost evaluation is exact: rationals everywhere, and scaled
//! integers on the hot paths where a common denominator fits a machine word.
//!
//! Module map:
//!
//! - [`tree_model`]: strategy profiles, subtree statistics, canonical codes.
//! - [`cost`]: exact rationals, agent and social cost, fairness ratio.
//! - [`equilibrium`]: improving moves, best response, Nash verification,
//!   best-response dynamics.
//! - [`enumeration`]: unlabeled rooted tree generation and exhaustive
//!   equilibrium search.
//! - [`balanced`]: balanced trees, extremal trees and the swap lemmas.
//! - [`structure_checks`]: structural properties every equilibrium obeys.
//! - [`metrics`]: optimum, PoA/PoS/fairness certificates.
//! - [`path_game`]: the variant where agents buy whole paths.
//! - [`report`]: JSON/CSV/DOT emission.

pub mod balanced;
pub mod cost;
pub mod enumeration;
pub mod equilibrium;
pub mod fixtures;
pub mod interval;
pub mod metrics;
pub mod path_game;
pub mod report;
pub mod structure_checks;
pub mod tree_model;

mod kernel;

pub use cost::{CostValue, Rational};
pub use tree_model::{CanonicalCode, RootedProfile, SubtreeStats};

/// Error type shared by the game-level operations.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum Error {
    #[error("profile is not a spanning tree: agent {agent} is on a cycle")]
    NotATree { agent: usize },
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("construction would need {nodes} nodes, cap is {cap}")]
    Overflow { nodes: String, cap: usize },
    #[error("invalid node arguments: {0}")]
    InvalidNodes(String),
    #[error("invalid dynamics policy: {0}")]
    InvalidPolicy(String),
    #[error("search budget of {budget} expanded states exceeded after {agents_checked} agents")]
    SearchBudgetExceeded { budget: u64, agents_checked: usize },
    #[error("invalid degree sequence: {0}")]
    InvalidSequence(String),
    #[error("no equilibrium exists for n = {0}")]
    NoEquilibrium(usize),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
