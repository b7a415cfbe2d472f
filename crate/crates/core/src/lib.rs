//! Entropy-aware message passing for graph neural networks.
//!
//! The library is built around a simple idea: assign each node a Dirichlet
//! energy, view `exp(-E_i/T)` as an unnormalized Boltzmann probability, and
//! take a gradient-ascent step on the Shannon entropy of that distribution
//! during message passing. Keeping the entropy away from zero keeps node
//! embeddings from collapsing onto each other as depth grows.
//!
//! Modules:
//!
//! - [`graph`]: immutable sparse CSR graphs
//! - [`matrix`]: dense row-major `f64` matrices (embeddings, weights)
//! - [`kernel`]: energies, Boltzmann state, entropy and its closed-form
//!   gradient, plus a finite-difference oracle
//! - [`gradcheck`]: seeded battery comparing the two gradients
//! - [`models`]: GCN layer stacks (basic / entropic / pairnorm variants) with
//!   manual forward and backward passes
//! - [`training`]: full-graph node classification with AdamW
//! - [`datasets`]: seeded synthetic generators and a plain-text dataset format
//! - [`diffusion`]: entropy-aware graph diffusion with explicit Euler stepping

pub mod datasets;
pub mod diffusion;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod kernel;
pub mod matrix;
pub mod models;
pub mod training;

pub use error::{Error, Result};
pub use graph::Graph;
pub use matrix::Matrix;
