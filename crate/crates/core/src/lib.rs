//! Local causal discovery with latent variables.
//!
//! Mixed (ancestral) graphs, m-separation and local separators, latent
//! projection, linear SEMs and short-trek covariances, conditional
//! independence testing, the lFCI family of discovery algorithms and a
//! simulation harness.

pub mod citest;
pub mod discovery;
pub mod fixtures;
pub mod mixed_graph;
pub mod projection;
pub mod sem;
pub mod separation;
pub mod simbench;
pub mod subsets;

pub use mixed_graph::{Edge, GraphClass, GraphError, Mark, MixedGraph, NodeId, ParseError};
pub use separation::SeparationError;
