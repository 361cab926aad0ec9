//! Corpus indexes: a flat FDE index for MUVERA-style search and a
//! centroid-pruned ("PLAID-lite") index for approximate-then-exact MaxSim.
//! Both keep the full token matrices so exact rescoring is always possible.

mod flat;
mod io;
mod kmeans;
mod plaid;

use std::cmp::Ordering;

use sha2::{Digest, Sha256};

pub use flat::{build_flat_index, search_flat, FlatFdeIndex};
pub use io::{index_from_bytes, index_to_bytes, load_index, save_index, INDEX_MAGIC, INDEX_VERSION};
pub use kmeans::{kmeans, nearest_centroid, KMeans};
pub use plaid::{build_plaid_lite, default_centroid_count, PlaidLiteIndex, DEFAULT_KMEANS_ITERATIONS};

use crate::error::{Error, Result};
use crate::model::{ScoredDoc, TokenMatrix};

/// Build provenance. The wall time is informational and is not persisted, so
/// saved files depend only on the corpus and configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildMeta {
    pub corpus_hash: [u8; 32],
    pub build_ms: Option<f64>,
}

impl BuildMeta {
    pub fn corpus_hash_hex(&self) -> String {
        self.corpus_hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// SHA-256 over every document's id, shape and raw value bits, in order.
pub fn corpus_hash(corpus: &[TokenMatrix]) -> [u8; 32] {
    let mut h = Sha256::new();
    for m in corpus {
        h.update((m.id().len() as u64).to_le_bytes());
        h.update(m.id().as_bytes());
        h.update((m.dim() as u64).to_le_bytes());
        h.update((m.len() as u64).to_le_bytes());
        for v in m.values() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

/// Either kind of persisted index.
#[derive(Debug, Clone, PartialEq)]
pub enum RetrievalIndex {
    Flat(FlatFdeIndex),
    PlaidLite(PlaidLiteIndex),
}

impl RetrievalIndex {
    pub fn kind(&self) -> &'static str {
        match self {
            RetrievalIndex::Flat(_) => "flat",
            RetrievalIndex::PlaidLite(_) => "plaid",
        }
    }

    pub fn docs(&self) -> &[TokenMatrix] {
        match self {
            RetrievalIndex::Flat(i) => i.docs(),
            RetrievalIndex::PlaidLite(i) => i.docs(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RetrievalIndex::Flat(i) => i.config().dim,
            RetrievalIndex::PlaidLite(i) => i.dim(),
        }
    }

    pub fn meta(&self) -> &BuildMeta {
        match self {
            RetrievalIndex::Flat(i) => i.meta(),
            RetrievalIndex::PlaidLite(i) => i.meta(),
        }
    }
}

pub(crate) fn check_corpus(corpus: &[TokenMatrix], dim: Option<usize>) -> Result<usize> {
    let first = corpus.first().ok_or(Error::EmptyCorpus)?;
    let dim = dim.unwrap_or(first.dim());
    if let Some(m) = corpus.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch {
            id: m.id().to_string(),
            expected: dim,
            actual: m.dim(),
        });
    }
    let mut seen = std::collections::HashSet::with_capacity(corpus.len());
    for m in corpus {
        if !seen.insert(m.id()) {
            return Err(Error::DuplicateId(m.id().to_string()));
        }
    }
    Ok(dim)
}

/// Indices of the best `k` scores by (score desc, id asc), in rank order.
pub(crate) fn top_k_indices(scores: &[f64], ids: &[&str], k: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| -> Ordering {
        scores[*b]
            .total_cmp(&scores[*a])
            .then_with(|| ids[*a].cmp(ids[*b]))
    };
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if idx.len() > k {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

pub(crate) fn scored(indices: &[usize], scores: &[f64], ids: &[&str]) -> Vec<ScoredDoc> {
    indices
        .iter()
        .map(|&i| ScoredDoc::new(ids[i], scores[i]))
        .collect()
}
