//! Dense-cluster detection and content correlation over streaming edges.
//!
//! Edges are routed into overlapping time windows, each sampled by a
//! fixed-size uniform reservoir. Large connected components of a closed
//! reservoir are stored as clusters; the correlation of two streams is the
//! Jaccard similarity of the nodes of all their clusters so far. Stored
//! clusters feed a phylogeny of streams and a search by correlation.
//! [`graphgen`] provides the random-graph dynamics used to validate the
//! detection guarantees.

pub mod clusters;
pub mod config;
pub mod correlation;
mod error;
pub mod graphgen;
pub mod ingest;
pub mod phylo;
pub mod search;
pub mod seed;
pub mod store;
pub mod windows;

pub use error::{Error, Result};
pub use ingest::TimedEdge;
