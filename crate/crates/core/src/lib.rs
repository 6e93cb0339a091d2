//! Hierarchical clustering tree retrieval.
//!
//! Chunks are embedded, clustered bottom-up with single linkage under cosine
//! distance, and queried by scanning every tree node for the one nearest the
//! query. The answer is the set of leaves under that node, so the result size
//! follows the tree structure instead of a fixed `k`.

pub mod cli;
pub mod cluster;
pub mod embed;
pub mod evalkit;
pub mod exec;
pub mod index;
pub mod ingest;
pub mod querytransform;
mod retry;
pub mod search;
pub mod store;
pub mod vectorspace;

pub use exec::Execution;
pub use retry::RetryPolicy;
