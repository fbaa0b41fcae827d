//! Influence diffusion on undirected graphs, variance-based (Sobol) decomposition of
//! a seed set's spread over binary seed-inclusion variables, and the
//! over-select-then-prune seed selection built on top of it.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: CSR adjacency with per-edge activation probabilities, edge-list
//!   I/O, Erdős–Rényi and Watts–Strogatz generators.
//! * [`diffusion`]: independent cascade and linear threshold simulation, Monte
//!   Carlo spread estimation, and an exact live-edge oracle for tiny graphs.
//! * [`heuristics`]: baseline seed selectors (degree, eigenvector, greedy,
//!   degree discount, Sigma, Pi).
//! * [`sobol`]: subset spread tables and first-order, higher-order and total
//!   Sobol indices, plus a brute-force ANOVA oracle.
//! * [`sim`]: collecting `⌈ak⌉` candidates with a base heuristic and pruning
//!   them by minimum total index.
//! * [`experiment`]: the reproducibility harness behind the command-line tool.

pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod heuristics;
pub mod rng;
pub mod sim;
pub mod sobol;
pub mod stats;

pub use diffusion::{estimate_spread, exact_ic_spread, Coupling, DiffusionConfig, Model, SpreadEstimate};
pub use error::{Error, Result};
pub use graph::{Graph, GraphGenSpec, NodeId};
pub use heuristics::{Heuristic, SeedSet};
pub use sim::{sim_select, PruneTrace, SimConfig};
pub use sobol::{SetFunction, SobolDecomposition, SubsetMask, SubsetSpreadTable};
