//! Mini-batch optimization laboratory for graph neural networks.
//!
//! The crate builds small graphs, samples mini-batches from them with Random
//! Node Sampling (RNS) and four structure-based baselines, trains a
//! message-passing GNN under full-graph and sampled regimes, and measures the
//! implicit-regularization quantities that finite-step SGD induces: the
//! epoch-averaged loss bias, per-batch loss variance and the batch-gradient
//! variance `R(w)`.
//!
//! Module map:
//! - [`graph`]: CSR graph, induced subgraphs, structural statistics, edge-list IO
//! - [`gen`]: Barabási–Albert, SBM and Erdős–Rényi generators with planted labels
//! - [`samplers`]: RNS, ClusterGCN, GraphSAINT random walk, neighbor, LADIES
//! - [`gnn`]: GCN / GraphSAGE-mean forward, backprop, finite-difference oracles
//! - [`trainer`]: optimizers and the full / chained / accumulated regimes
//! - [`metrics`]: regularization report, modified loss, edge-removal sensitivity
//! - [`theory`]: numerical checks of the modified-flow, bias and degree-thinning results
//! - [`experiment`]: config file and the commands behind the `gnnlab` binary

pub mod error;
pub mod experiment;
pub mod gen;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod powerlaw;
pub mod rng;
pub mod samplers;
pub mod sparse;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Batch, Graph, Split};
