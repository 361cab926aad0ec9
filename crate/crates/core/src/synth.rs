//! Synthetic corpora with planted relevance.
//!
//! Every token starts as an independent random unit vector. For each
//! (query, relevant document) pair a fresh shared direction `s` is drawn and
//! mixed into some query tokens and about a quarter of the document's tokens
//! as `normalize(PLANT_WEIGHT * s + sqrt(1 - PLANT_WEIGHT^2) * noise)`. Exact
//! MaxSim therefore sees the planted pairs as strong matches while
//! non-relevant documents only offer chance-level similarities.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Qrels, TokenMatrix};

const PLANT_WEIGHT: f64 = 0.9;
const MAX_QUERY_TOKENS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub num_docs: usize,
    pub tokens_per_doc: usize,
    pub num_queries: usize,
    /// Tokens per query; defaults to `min(tokens_per_doc, 32)` and is raised
    /// to `relevant_per_query` so every relevant document gets a query token.
    pub query_tokens: usize,
    pub dim: usize,
    pub relevant_per_query: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(
        num_docs: usize,
        tokens_per_doc: usize,
        num_queries: usize,
        dim: usize,
        relevant_per_query: usize,
        seed: u64,
    ) -> Self {
        Self {
            num_docs,
            tokens_per_doc,
            num_queries,
            query_tokens: tokens_per_doc.min(MAX_QUERY_TOKENS),
            dim,
            relevant_per_query,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("num_docs", self.num_docs),
            ("tokens_per_doc", self.tokens_per_doc),
            ("num_queries", self.num_queries),
            ("query_tokens", self.query_tokens),
            ("d", self.dim),
            ("relevant_per_query", self.relevant_per_query),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if self.relevant_per_query > self.num_docs {
            return Err(Error::InvalidConfig(format!(
                "relevant_per_query {} exceeds num_docs {}",
                self.relevant_per_query, self.num_docs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub docs: Vec<TokenMatrix>,
    pub queries: Vec<TokenMatrix>,
    pub qrels: Qrels,
}

fn id_width(count: usize) -> usize {
    count.saturating_sub(1).max(1).to_string().len()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn planted(rng: &mut ChaCha8Rng, shared: &[f64]) -> Vec<f64> {
    let noise = random_unit(rng, shared.len());
    let rest = (1.0 - PLANT_WEIGHT * PLANT_WEIGHT).sqrt();
    let v: Vec<f64> = shared
        .iter()
        .zip(&noise)
        .map(|(s, e)| PLANT_WEIGHT * s + rest * e)
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn to_matrix(id: String, dim: usize, rows: Vec<Vec<f64>>) -> Result<TokenMatrix> {
    let values = rows.into_iter().flatten().map(|x| x as f32).collect();
    TokenMatrix::normalized(id, dim, values)
}

/// Generates `(docs, queries, qrels)` deterministically from `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let dim = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let doc_width = id_width(spec.num_docs);
    let query_width = id_width(spec.num_queries);

    let mut docs: Vec<Vec<Vec<f64>>> = (0..spec.num_docs)
        .map(|_| (0..spec.tokens_per_doc).map(|_| random_unit(&mut rng, dim)).collect())
        .collect();
    let planted_per_doc = (spec.tokens_per_doc / 4).max(1);
    let query_tokens = spec.query_tokens.max(spec.relevant_per_query);

    let mut qrels = Qrels::new();
    let mut queries = Vec::with_capacity(spec.num_queries);
    for qi in 0..spec.num_queries {
        let qid = format!("q{qi:0query_width$}");
        let mut relevant = sample(&mut rng, spec.num_docs, spec.relevant_per_query).into_vec();
        relevant.sort_unstable();
        let mut rows: Vec<Vec<f64>> = (0..query_tokens).map(|_| random_unit(&mut rng, dim)).collect();
        for (r, &doc) in relevant.iter().enumerate() {
            let shared = random_unit(&mut rng, dim);
            for t in (r..query_tokens).step_by(spec.relevant_per_query) {
                rows[t] = planted(&mut rng, &shared);
            }
            for pos in sample(&mut rng, spec.tokens_per_doc, planted_per_doc) {
                docs[doc][pos] = planted(&mut rng, &shared);
            }
            qrels.insert(qid.clone(), format!("d{doc:0doc_width$}"), 1);
        }
        queries.push(to_matrix(qid, dim, rows)?);
    }

    let docs = docs
        .into_iter()
        .enumerate()
        .map(|(i, rows)| to_matrix(format!("d{i:0doc_width$}"), dim, rows))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticCorpus { docs, queries, qrels })
}

/// Convenience wrapper over [`generate`] with the default query length.
pub fn gen_synthetic_corpus(
    num_docs: usize,
    tokens_per_doc: usize,
    num_queries: usize,
    dim: usize,
    relevant_per_query: usize,
    seed: u64,
) -> Result<SyntheticCorpus> {
    generate(&SyntheticSpec::new(
        num_docs,
        tokens_per_doc,
        num_queries,
        dim,
        relevant_per_query,
        seed,
    ))
}
