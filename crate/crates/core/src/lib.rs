//! Multi-vector late-interaction retrieval.
//!
//! Exact MaxSim search, centroid-pruned ("PLAID-lite") search, MUVERA-style
//! fixed-dimensional encodings with flat inner-product search, two-stage
//! FDE + MaxSim reranking, and a TREC-style evaluation and latency harness.

pub mod bench;
pub mod error;
pub mod eval;
pub mod fde;
pub mod index;
pub mod ingest;
pub mod model;
pub mod retrieval;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    validate_token_matrix, EncodingConfig, FdeVector, InnerProjection, Qrels, Role, RunResult, ScoredDoc,
    TokenMatrix,
};
