//! Shared data types: token matrices, encoding configuration, fixed-dimensional
//! encodings, relevance judgments and ranked runs.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::dot;

/// Allowed deviation of a row's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-4;

/// Rows whose norm is already this close to 1 are left bit-for-bit untouched by
/// [`TokenMatrix::normalized`], so re-normalizing stored unit data is a no-op.
const RENORMALIZE_SLACK: f64 = 1e-5;

pub const DEFAULT_DIM: usize = 128;

/// Token embeddings of one query or document: `n` rows of dimension `d`,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    id: String,
    dim: usize,
    values: Vec<f32>,
}

impl TokenMatrix {
    /// Builds a matrix and checks every invariant, including unit row norms.
    pub fn new(id: impl Into<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        validate_token_matrix(Self::unchecked(id, dim, values))
    }

    /// Builds a matrix from producer values, L2-normalizing each row first.
    pub fn normalized(id: impl Into<String>, dim: usize, mut values: Vec<f32>) -> Result<Self> {
        let id = id.into();
        check_shape(&id, dim, &values)?;
        check_finite(&id, dim, &values)?;
        for (row, chunk) in values.chunks_exact_mut(dim).enumerate() {
            let norm = dot(chunk, chunk).sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNorm { id, row });
            }
            if (norm - 1.0).abs() > RENORMALIZE_SLACK {
                let inv = 1.0 / norm;
                for v in chunk.iter_mut() {
                    *v = (*v as f64 * inv) as f32;
                }
            }
        }
        Self::new(id, dim, values)
    }

    pub(crate) fn unchecked(id: impl Into<String>, dim: usize, values: Vec<f32>) -> Self {
        Self {
            id: id.into(),
            dim,
            values,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.dim.max(1))
    }

    pub fn into_parts(self) -> (String, usize, Vec<f32>) {
        (self.id, self.dim, self.values)
    }
}

fn check_shape(id: &str, dim: usize, values: &[f32]) -> Result<()> {
    if dim == 0 {
        return Err(Error::DimensionMismatch {
            id: id.to_string(),
            expected: 1,
            actual: 0,
        });
    }
    if values.is_empty() {
        return Err(Error::EmptyTokenMatrix { id: id.to_string() });
    }
    if !values.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            id: id.to_string(),
            expected: dim,
            actual: values.len() % dim,
        });
    }
    Ok(())
}

fn check_finite(id: &str, dim: usize, values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::NonFinite {
            id: id.to_string(),
            row: pos / dim,
            col: pos % dim,
        }),
        None => Ok(()),
    }
}

/// Checks shape, finiteness and unit row norms; returns the matrix unchanged.
pub fn validate_token_matrix(m: TokenMatrix) -> Result<TokenMatrix> {
    check_shape(&m.id, m.dim, &m.values)?;
    check_finite(&m.id, m.dim, &m.values)?;
    for (row, chunk) in m.values.chunks_exact(m.dim).enumerate() {
        let norm = dot(chunk, chunk).sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized {
                id: m.id.clone(),
                row,
                norm,
            });
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InnerProjection {
    Identity,
    /// Count-sketch projection into `target_dim` buckets per partition.
    SparseSketch { target_dim: usize },
}

/// Hyperparameters of the fixed-dimensional encoding. The same config encodes
/// queries and documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub dim: usize,
    pub k_sim: u32,
    pub repetitions: usize,
    pub projection: InnerProjection,
    pub seed: u64,
}

pub const MAX_K_SIM: u32 = 16;

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            k_sim: 3,
            repetitions: 1,
            projection: InnerProjection::Identity,
            seed: 0,
        }
    }
}

impl EncodingConfig {
    pub fn new(dim: usize, k_sim: u32) -> Self {
        Self {
            dim,
            k_sim,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_repetitions(mut self, repetitions: usize) -> Self {
        self.repetitions = repetitions;
        self
    }

    pub fn with_projection(mut self, projection: InnerProjection) -> Self {
        self.projection = projection;
        self
    }

    /// Sketch mode with the default width of `dim / 4` (at least 1).
    pub fn default_sketch(dim: usize) -> InnerProjection {
        InnerProjection::SparseSketch {
            target_dim: (dim / 4).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("d must be at least 1".into()));
        }
        if self.k_sim > MAX_K_SIM {
            return Err(Error::InvalidConfig(format!(
                "k_sim {} exceeds {MAX_K_SIM}",
                self.k_sim
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        if let InnerProjection::SparseSketch { target_dim } = self.projection {
            if target_dim == 0 || target_dim > self.dim {
                return Err(Error::InvalidConfig(format!(
                    "sketch target_dim {target_dim} must lie in [1, {}]",
                    self.dim
                )));
            }
        }
        Ok(())
    }

    pub fn num_partitions(&self) -> usize {
        1usize << self.k_sim
    }

    pub fn proj_dim(&self) -> usize {
        match self.projection {
            InnerProjection::Identity => self.dim,
            InnerProjection::SparseSketch { target_dim } => target_dim,
        }
    }

    pub fn fde_dim(&self) -> usize {
        self.repetitions * self.proj_dim() * self.num_partitions()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Query,
    Document,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdeVector {
    pub id: String,
    pub role: Role,
    pub values: Vec<f32>,
}

impl FdeVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Graded relevance judgments: query id -> doc id -> grade. Absent pairs are
/// grade 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment, returning the previous grade if one existed.
    pub fn insert(&mut self, qid: impl Into<String>, docid: impl Into<String>, grade: u32) -> Option<u32> {
        self.judgments
            .entry(qid.into())
            .or_default()
            .insert(docid.into(), grade)
    }

    pub fn grade(&self, qid: &str, docid: &str) -> u32 {
        self.judgments
            .get(qid)
            .and_then(|m| m.get(docid))
            .copied()
            .unwrap_or(0)
    }

    pub fn query(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(qid)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.judgments.iter().map(|(q, m)| (q.as_str(), m))
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    /// Number of (query, document) judgments of any grade.
    pub fn judgment_count(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn positive_count(&self) -> usize {
        self.judgments
            .values()
            .map(|m| m.values().filter(|&&g| g > 0).count())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Ranking order: score descending, then doc id ascending.
pub fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Sorts by [`rank_order`] and keeps the first `top_k`.
pub fn sort_and_truncate(hits: &mut Vec<ScoredDoc>, top_k: usize) {
    if hits.len() > top_k {
        hits.select_nth_unstable_by(top_k, rank_order);
        hits.truncate(top_k);
    }
    hits.sort_unstable_by(rank_order);
}

/// Ranked retrieval output: query id -> hits in rank order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunResult {
    queries: BTreeMap<String, Vec<ScoredDoc>>,
}

impl RunResult {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores the hits for one query, sorting them into rank order.
    pub fn insert(&mut self, qid: impl Into<String>, mut hits: Vec<ScoredDoc>) -> Result<()> {
        hits.sort_unstable_by(rank_order);
        self.insert_ranked(qid, hits)
    }

    /// Stores hits exactly in the given order (e.g. as read from a run file).
    pub fn insert_ranked(&mut self, qid: impl Into<String>, hits: Vec<ScoredDoc>) -> Result<()> {
        let qid = qid.into();
        let mut seen = std::collections::HashSet::with_capacity(hits.len());
        for h in &hits {
            if !seen.insert(h.doc_id.as_str()) {
                return Err(Error::DuplicateId(format!("{qid}/{}", h.doc_id)));
            }
        }
        self.queries.insert(qid, hits);
        Ok(())
    }

    pub fn get(&self, qid: &str) -> Option<&[ScoredDoc]> {
        self.queries.get(qid).map(Vec::as_slice)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.queries.iter().map(|(q, h)| (q.as_str(), h.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}
