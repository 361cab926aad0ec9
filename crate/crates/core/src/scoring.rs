//! Exact late-interaction scoring and FDE inner products.
//!
//! All dot products accumulate in `f64` with a fixed reduction order: eight
//! interleaved partial sums over the leading multiple of eight, combined
//! pairwise, then the tail added left to right. The result is bit-stable for a
//! given input and vectorizes well.

use crate::error::{Error, Result};
use crate::model::{sort_and_truncate, FdeVector, Role, ScoredDoc, TokenMatrix};

const LANES: usize = 8;

/// Inner product of two equal-length `f32` slices, accumulated in `f64`.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let split = a.len() - a.len() % LANES;
    let (a_head, a_tail) = a.split_at(split);
    let (b_head, b_tail) = b.split_at(split);
    let mut acc = [0.0f64; LANES];
    for (ca, cb) in a_head.chunks_exact(LANES).zip(b_head.chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] += ca[l] as f64 * cb[l] as f64;
        }
    }
    let mut sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in a_tail.iter().zip(b_tail) {
        sum += *x as f64 * *y as f64;
    }
    sum
}

/// Late-interaction score: for each query token the best dot product over the
/// document tokens, summed over query tokens in row order.
pub fn maxsim(query: &TokenMatrix, doc: &TokenMatrix) -> Result<f64> {
    if query.dim() != doc.dim() {
        return Err(Error::DimensionMismatch {
            id: doc.id().to_string(),
            expected: query.dim(),
            actual: doc.dim(),
        });
    }
    Ok(maxsim_unchecked(query, doc))
}

pub(crate) fn maxsim_unchecked(query: &TokenMatrix, doc: &TokenMatrix) -> f64 {
    // Blocked over document rows so a block stays in cache while every query
    // row visits it.
    const DOC_BLOCK: usize = 64;
    let nq = query.len();
    let mut best = vec![f64::NEG_INFINITY; nq];
    let doc_rows: Vec<&[f32]> = doc.rows().collect();
    for block in doc_rows.chunks(DOC_BLOCK) {
        for (i, q) in query.rows().enumerate() {
            let mut m = best[i];
            for d in block {
                let s = dot(q, d);
                if s > m {
                    m = s;
                }
            }
            best[i] = m;
        }
    }
    best.iter().sum()
}

/// Inner product between a query FDE and a document FDE.
pub fn fde_score(query: &FdeVector, doc: &FdeVector) -> Result<f64> {
    if query.role != Role::Query {
        return Err(Error::RoleMismatch {
            expected: Role::Query,
            actual: query.role,
        });
    }
    if doc.role != Role::Document {
        return Err(Error::RoleMismatch {
            expected: Role::Document,
            actual: doc.role,
        });
    }
    if query.dim() != doc.dim() {
        return Err(Error::DimensionMismatch {
            id: doc.id.clone(),
            expected: query.dim(),
            actual: doc.dim(),
        });
    }
    Ok(dot(&query.values, &doc.values))
}

/// Exact MaxSim against every document, returning the best `top_k` by
/// (score desc, doc id asc).
pub fn maxsim_batch(query: &TokenMatrix, docs: &[TokenMatrix], top_k: usize) -> Result<Vec<ScoredDoc>> {
    maxsim_batch_refs(query, docs.iter(), top_k)
}

pub(crate) fn maxsim_batch_refs<'a>(
    query: &TokenMatrix,
    docs: impl ExactSizeIterator<Item = &'a TokenMatrix>,
    top_k: usize,
) -> Result<Vec<ScoredDoc>> {
    if docs.len() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut hits = Vec::with_capacity(docs.len());
    for doc in docs {
        hits.push(ScoredDoc::new(doc.id(), maxsim(query, doc)?));
    }
    sort_and_truncate(&mut hits, top_k);
    Ok(hits)
}
