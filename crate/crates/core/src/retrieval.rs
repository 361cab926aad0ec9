//! The retrieval pipelines: exact MaxSim over the whole corpus, PLAID-lite
//! (centroid candidates, exact rescoring), MUVERA (FDE inner-product scan) and
//! MUVERA + rerank (FDE top-K rescored with exact MaxSim).

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fde::FdeEncoder;
use crate::index::{scored, search_flat, top_k_indices, FlatFdeIndex, PlaidLiteIndex, RetrievalIndex};
use crate::model::{sort_and_truncate, EncodingConfig, RunResult, ScoredDoc, TokenMatrix};
use crate::scoring::{maxsim, maxsim_batch_refs};

pub const DEFAULT_TOP_K: usize = 1000;
pub const DEFAULT_RERANK_DEPTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    ExactFull,
    PlaidLite { n_candidates: usize },
    Muvera,
    MuveraRerank { depth: usize },
}

impl PipelineMode {
    pub fn name(&self) -> &'static str {
        match self {
            PipelineMode::ExactFull => "exact",
            PipelineMode::PlaidLite { .. } => "plaid",
            PipelineMode::Muvera => "muvera",
            PipelineMode::MuveraRerank { .. } => "muvera-rerank",
        }
    }

    pub fn uses_fde(&self) -> bool {
        matches!(self, PipelineMode::Muvera | PipelineMode::MuveraRerank { .. })
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineMode::PlaidLite { n_candidates } => write!(f, "plaid(candidates={n_candidates})"),
            PipelineMode::MuveraRerank { depth } => write!(f, "muvera-rerank(K={depth})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub top_k: usize,
    /// Encoding for the FDE modes. `None` accepts whatever the index was
    /// built with; `Some` must match it.
    pub encoding: Option<EncodingConfig>,
}

impl PipelineConfig {
    pub fn new(mode: PipelineMode, top_k: usize) -> Self {
        Self {
            mode,
            top_k,
            encoding: None,
        }
    }

    pub fn with_encoding(mut self, encoding: EncodingConfig) -> Self {
        self.encoding = Some(encoding);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be positive".into()));
        }
        match self.mode {
            PipelineMode::MuveraRerank { depth } if depth < self.top_k => Err(Error::RerankDepthBelowTopK {
                depth,
                top_k: self.top_k,
            }),
            PipelineMode::PlaidLite { n_candidates } if n_candidates < self.top_k => {
                Err(Error::CandidatesBelowTopK {
                    candidates: n_candidates,
                    top_k: self.top_k,
                })
            }
            _ => Ok(()),
        }
    }
}

/// Per-query wall times in milliseconds, from a monotonic clock.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTiming {
    pub query_id: String,
    pub encode_ms: f64,
    pub search_ms: f64,
    pub rerank_ms: f64,
    pub total_ms: f64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

enum Engine<'a> {
    Exact(&'a [TokenMatrix]),
    Plaid(&'a PlaidLiteIndex, usize),
    Muvera(&'a FlatFdeIndex, FdeEncoder),
    Rerank(&'a FlatFdeIndex, FdeEncoder, usize),
}

/// A pipeline bound to an index, with its encoder prepared up front so
/// per-query timings only cover per-query work.
pub struct Searcher<'a> {
    engine: Engine<'a>,
    top_k: usize,
}

impl<'a> Searcher<'a> {
    pub fn new(index: &'a RetrievalIndex, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let mismatch = || Error::ModeMismatch {
            mode: config.mode.name().to_string(),
            index: index.kind().to_string(),
        };
        let engine = match (config.mode, index) {
            (PipelineMode::ExactFull, idx) => Engine::Exact(idx.docs()),
            (PipelineMode::PlaidLite { n_candidates }, RetrievalIndex::PlaidLite(p)) => Engine::Plaid(p, n_candidates),
            (PipelineMode::Muvera | PipelineMode::MuveraRerank { .. }, RetrievalIndex::Flat(f)) => {
                if let Some(enc) = config.encoding {
                    if enc != *f.config() {
                        return Err(Error::InvalidConfig(format!(
                            "pipeline encoding {enc:?} differs from index encoding {:?}",
                            f.config()
                        )));
                    }
                }
                let encoder = f.encoder()?;
                match config.mode {
                    PipelineMode::MuveraRerank { depth } => Engine::Rerank(f, encoder, depth),
                    _ => Engine::Muvera(f, encoder),
                }
            }
            _ => return Err(mismatch()),
        };
        Ok(Self {
            engine,
            top_k: config.top_k,
        })
    }

    /// Exact search over a bare corpus, without any index.
    pub fn exact(corpus: &'a [TokenMatrix], top_k: usize) -> Result<Self> {
        PipelineConfig::new(PipelineMode::ExactFull, top_k).validate()?;
        Ok(Self {
            engine: Engine::Exact(corpus),
            top_k,
        })
    }

    pub fn search(&self, query: &TokenMatrix) -> Result<(Vec<ScoredDoc>, QueryTiming)> {
        let start = Instant::now();
        let (mut encode_ms, mut rerank_ms) = (0.0, 0.0);
        let hits = match &self.engine {
            Engine::Exact(docs) => maxsim_batch_refs(query, docs.iter(), self.top_k)?,
            Engine::Plaid(index, n_candidates) => {
                let candidates = index.candidates(query, *n_candidates)?;
                let docs = index.docs();
                let mut hits = candidates
                    .iter()
                    .map(|&i| Ok(ScoredDoc::new(docs[i].id(), maxsim(query, &docs[i])?)))
                    .collect::<Result<Vec<_>>>()?;
                sort_and_truncate(&mut hits, self.top_k);
                hits
            }
            Engine::Muvera(index, encoder) => {
                let qf = encoder.encode_query(query)?;
                encode_ms = ms_since(start);
                search_flat(index, &qf, self.top_k)?
            }
            Engine::Rerank(index, encoder, depth) => {
                let qf = encoder.encode_query(query)?;
                encode_ms = ms_since(start);
                let scores = index.scores(&qf.values);
                let ids: Vec<&str> = index.doc_ids().collect();
                let candidates = top_k_indices(&scores, &ids, *depth);
                let rerank_start = Instant::now();
                let docs = index.docs();
                let mut hits = candidates
                    .iter()
                    .map(|&i| Ok(ScoredDoc::new(docs[i].id(), maxsim(query, &docs[i])?)))
                    .collect::<Result<Vec<_>>>()?;
                sort_and_truncate(&mut hits, self.top_k);
                rerank_ms = ms_since(rerank_start);
                hits
            }
        };
        let total_ms = ms_since(start);
        let timing = QueryTiming {
            query_id: query.id().to_string(),
            encode_ms,
            search_ms: (total_ms - encode_ms - rerank_ms).max(0.0),
            rerank_ms,
            total_ms,
        };
        Ok((hits, timing))
    }

    /// Runs every query in order.
    pub fn run(&self, queries: &[TokenMatrix]) -> Result<(RunResult, Vec<QueryTiming>)> {
        let mut run = RunResult::new();
        let mut timings = Vec::with_capacity(queries.len());
        for q in queries {
            let (hits, timing) = self.search(q)?;
            if run.get(q.id()).is_some() {
                return Err(Error::DuplicateId(q.id().to_string()));
            }
            run.insert_ranked(q.id(), hits)?;
            timings.push(timing);
        }
        Ok((run, timings))
    }
}

/// Runs `queries` through the configured pipeline.
pub fn retrieve(
    queries: &[TokenMatrix],
    index: &RetrievalIndex,
    config: &PipelineConfig,
) -> Result<(RunResult, Vec<QueryTiming>)> {
    Searcher::new(index, config)?.run(queries)
}

/// Exact MaxSim retrieval over a corpus without building an index.
pub fn retrieve_exact(
    queries: &[TokenMatrix],
    corpus: &[TokenMatrix],
    top_k: usize,
) -> Result<(RunResult, Vec<QueryTiming>)> {
    Searcher::exact(corpus, top_k)?.run(queries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

/// `|top-k(a) ∩ top-k(b)| / k` per query, and the mean over queries.
pub fn overlap_at_k(a: &RunResult, b: &RunResult, k: usize) -> Result<Overlap> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if let Some(q) = b.query_ids().find(|q| a.get(q).is_none()) {
        return Err(Error::QueryMissingFromRun(q.to_string()));
    }
    let mut per_query = BTreeMap::new();
    for (qid, hits_a) in a.iter() {
        let hits_b = b.get(qid).ok_or_else(|| Error::QueryMissingFromRun(qid.to_string()))?;
        let top_b: std::collections::HashSet<&str> = hits_b.iter().take(k).map(|h| h.doc_id.as_str()).collect();
        let shared = hits_a.iter().take(k).filter(|h| top_b.contains(h.doc_id.as_str())).count();
        per_query.insert(qid.to_string(), shared as f64 / k as f64);
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    Ok(Overlap { per_query, mean })
}

/// Scores a fixed candidate list with exact MaxSim; useful for external
/// candidate generators.
pub fn rerank(query: &TokenMatrix, candidates: &[&TokenMatrix], top_k: usize) -> Result<Vec<ScoredDoc>> {
    let scores = candidates
        .iter()
        .map(|d| maxsim(query, d))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<&str> = candidates.iter().map(|d| d.id()).collect();
    Ok(scored(&top_k_indices(&scores, &ids, top_k), &scores, &ids))
}
