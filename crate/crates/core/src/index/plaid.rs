use std::time::Instant;

use super::kmeans::kmeans;
use super::{check_corpus, corpus_hash, top_k_indices, BuildMeta};
use crate::error::{Error, Result};
use crate::model::TokenMatrix;
use crate::scoring::dot;

pub const DEFAULT_KMEANS_ITERATIONS: usize = 20;

/// `round(4 * sqrt(total_tokens))`, clamped to `[1, total_tokens]`.
pub fn default_centroid_count(total_tokens: usize) -> usize {
    ((4.0 * (total_tokens as f64).sqrt()).round() as usize).clamp(1, total_tokens.max(1))
}

/// Token-level centroids plus full token matrices. Candidate documents are
/// ranked by MaxSim against their tokens' centroids, then rescored exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaidLiteIndex {
    dim: usize,
    centroids: Vec<f32>,
    /// Centroid of every token, documents concatenated in corpus order.
    assignments: Vec<u32>,
    /// Start of each document in `assignments`, plus a final end offset.
    offsets: Vec<usize>,
    /// Sorted distinct centroid ids per document.
    doc_codes: Vec<Vec<u32>>,
    docs: Vec<TokenMatrix>,
    iterations: usize,
    seed: u64,
    pub(super) meta: BuildMeta,
}

impl PlaidLiteIndex {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        dim: usize,
        centroids: Vec<f32>,
        assignments: Vec<u32>,
        docs: Vec<TokenMatrix>,
        iterations: usize,
        seed: u64,
        meta: BuildMeta,
    ) -> Result<Self> {
        let mut offsets = Vec::with_capacity(docs.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for d in &docs {
            total += d.len();
            offsets.push(total);
        }
        let k = centroids.len() / dim.max(1);
        if assignments.len() != total || assignments.iter().any(|&a| a as usize >= k) {
            return Err(Error::InvalidConfig("centroid assignments do not match the corpus".into()));
        }
        let doc_codes = offsets
            .windows(2)
            .map(|w| {
                let mut codes = assignments[w[0]..w[1]].to_vec();
                codes.sort_unstable();
                codes.dedup();
                codes
            })
            .collect();
        Ok(Self {
            dim,
            centroids,
            assignments,
            offsets,
            doc_codes,
            docs,
            iterations,
            seed,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_centroids(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn token_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    /// Centroid ids of document `i`'s tokens, in token order.
    pub fn doc_assignments(&self, i: usize) -> &[u32] {
        &self.assignments[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn docs(&self) -> &[TokenMatrix] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn meta(&self) -> &BuildMeta {
        &self.meta
    }

    /// Centroid-level MaxSim of every document: for each query token, the best
    /// inner product with any centroid used by the document, summed.
    pub fn centroid_scores(&self, query: &TokenMatrix) -> Result<Vec<f64>> {
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                id: query.id().to_string(),
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let k = self.num_centroids();
        let nq = query.len();
        // centroid-major so one document's lookups stay within a few rows
        let mut table = vec![0.0f64; k * nq];
        for (c, cent) in self.centroids.chunks_exact(self.dim).enumerate() {
            for (i, q) in query.rows().enumerate() {
                table[c * nq + i] = dot(q, cent);
            }
        }
        let mut best = vec![0.0f64; nq];
        Ok(self
            .doc_codes
            .iter()
            .map(|codes| {
                best.iter_mut().for_each(|b| *b = f64::NEG_INFINITY);
                for &c in codes {
                    let row = &table[c as usize * nq..(c as usize + 1) * nq];
                    for (b, &s) in best.iter_mut().zip(row) {
                        if s > *b {
                            *b = s;
                        }
                    }
                }
                best.iter().sum()
            })
            .collect())
    }

    /// Indices of the `n_candidates` best documents by centroid-level score,
    /// ties by doc id ascending.
    pub fn candidates(&self, query: &TokenMatrix, n_candidates: usize) -> Result<Vec<usize>> {
        let scores = self.centroid_scores(query)?;
        let ids: Vec<&str> = self.docs.iter().map(TokenMatrix::id).collect();
        Ok(top_k_indices(&scores, &ids, n_candidates))
    }
}

/// Clusters every document token into `num_centroids` unit centroids and
/// records each token's nearest centroid.
pub fn build_plaid_lite(
    corpus: &[TokenMatrix],
    num_centroids: usize,
    iterations: usize,
    seed: u64,
) -> Result<PlaidLiteIndex> {
    let start = Instant::now();
    let dim = check_corpus(corpus, None)?;
    let total: usize = corpus.iter().map(TokenMatrix::len).sum();
    if num_centroids == 0 || num_centroids > total {
        return Err(Error::InvalidConfig(format!(
            "centroid count {num_centroids} must lie in [1, {total}]"
        )));
    }
    let mut points = Vec::with_capacity(total * dim);
    for m in corpus {
        points.extend_from_slice(m.values());
    }
    let km = kmeans(&points, dim, num_centroids, iterations, seed)?;
    let meta = BuildMeta {
        corpus_hash: corpus_hash(corpus),
        build_ms: Some(start.elapsed().as_secs_f64() * 1e3),
    };
    PlaidLiteIndex::from_parts(dim, km.centroids, km.assignments, corpus.to_vec(), iterations, seed, meta)
}
