//! Python bindings: token matrices, FDE encoding, index build/load/search,
//! evaluation and the synthetic corpus generator.

use std::collections::BTreeMap;

use lateindex::eval::{evaluate_run, DEFAULT_CUTOFFS};
use lateindex::fde::FdeEncoder;
use lateindex::index::{
    build_flat_index, build_plaid_lite, default_centroid_count, load_index, save_index, RetrievalIndex,
    DEFAULT_KMEANS_ITERATIONS,
};
use lateindex::retrieval::{PipelineConfig, PipelineMode, Searcher, DEFAULT_RERANK_DEPTH, DEFAULT_TOP_K};
use lateindex::synth::gen_synthetic_corpus;
use lateindex::{ingest, scoring, EncodingConfig, InnerProjection, Qrels, RunResult, ScoredDoc};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(lateindex_py, LateIndexError, PyException);

fn to_py<T>(r: lateindex::Result<T>) -> PyResult<T> {
    r.map_err(|e| LateIndexError::new_err(e.to_string()))
}

type PyRun = BTreeMap<String, Vec<(String, f64)>>;
type PyQrels = BTreeMap<String, BTreeMap<String, u32>>;

fn run_to_py(run: &RunResult) -> PyRun {
    run.iter()
        .map(|(q, hits)| (q.to_string(), hits.iter().map(|h| (h.doc_id.clone(), h.score)).collect()))
        .collect()
}

fn run_from_py(run: PyRun) -> lateindex::Result<RunResult> {
    let mut out = RunResult::new();
    for (q, hits) in run {
        out.insert_ranked(q, hits.into_iter().map(|(d, s)| ScoredDoc::new(d, s)).collect())?;
    }
    Ok(out)
}

fn qrels_to_py(qrels: &Qrels) -> PyQrels {
    qrels.iter().map(|(q, m)| (q.to_string(), m.clone())).collect()
}

fn qrels_from_py(qrels: PyQrels) -> Qrels {
    let mut out = Qrels::new();
    for (q, docs) in qrels {
        for (d, g) in docs {
            out.insert(q.clone(), d, g);
        }
    }
    out
}

/// A document or query as a list of unit-norm token rows.
#[pyclass(name = "TokenMatrix", module = "lateindex_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTokenMatrix {
    inner: lateindex::TokenMatrix,
}

#[pymethods]
impl PyTokenMatrix {
    /// Rows are L2-normalized on construction unless `normalize=False`, in
    /// which case they must already be unit-norm.
    #[new]
    #[pyo3(signature = (id, rows, normalize = true))]
    fn new(id: String, rows: Vec<Vec<f32>>, normalize: bool) -> PyResult<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LateIndexError::new_err("rows have different lengths"));
        }
        let values = rows.into_iter().flatten().collect();
        let inner = if normalize {
            lateindex::TokenMatrix::normalized(id, dim, values)
        } else {
            lateindex::TokenMatrix::new(id, dim, values)
        };
        Ok(Self { inner: to_py(inner)? })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn rows(&self) -> Vec<Vec<f32>> {
        self.inner.rows().map(<[f32]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!("TokenMatrix(id={:?}, tokens={}, dim={})", self.inner.id(), self.inner.len(), self.inner.dim())
    }
}

/// FDE parameters: token dim, SimHash bits, repetitions, optional count
/// sketch output size, and seed.
#[pyclass(name = "EncodingConfig", module = "lateindex_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEncodingConfig {
    inner: EncodingConfig,
}

#[pymethods]
impl PyEncodingConfig {
    #[new]
    #[pyo3(signature = (dim = 128, k_sim = 3, repetitions = 1, sketch_dim = None, seed = 0))]
    fn new(dim: usize, k_sim: u32, repetitions: usize, sketch_dim: Option<usize>, seed: u64) -> PyResult<Self> {
        let projection = match sketch_dim {
            Some(target_dim) => InnerProjection::SparseSketch { target_dim },
            None => InnerProjection::Identity,
        };
        let inner = EncodingConfig::new(dim, k_sim)
            .with_repetitions(repetitions)
            .with_projection(projection)
            .with_seed(seed);
        to_py(inner.validate())?;
        Ok(Self { inner })
    }

    #[getter]
    fn fde_dim(&self) -> usize {
        self.inner.fde_dim()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn matrices(items: &[PyRef<'_, PyTokenMatrix>]) -> Vec<lateindex::TokenMatrix> {
    items.iter().map(|m| m.inner.clone()).collect()
}

/// A persisted or freshly built retrieval index (flat FDE or PLAID-lite).
#[pyclass(name = "Index", module = "lateindex_py", frozen)]
struct PyIndex {
    inner: RetrievalIndex,
}

#[pymethods]
impl PyIndex {
    #[staticmethod]
    fn build_flat(docs: Vec<PyRef<'_, PyTokenMatrix>>, config: &PyEncodingConfig) -> PyResult<Self> {
        let flat = to_py(build_flat_index(&matrices(&docs), &config.inner))?;
        Ok(Self {
            inner: RetrievalIndex::Flat(flat),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (docs, centroids = None, iterations = DEFAULT_KMEANS_ITERATIONS, seed = 0))]
    fn build_plaid(
        docs: Vec<PyRef<'_, PyTokenMatrix>>,
        centroids: Option<usize>,
        iterations: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let docs = matrices(&docs);
        let tokens = docs.iter().map(|m| m.len()).sum();
        let count = centroids.unwrap_or_else(|| default_centroid_count(tokens));
        let plaid = to_py(build_plaid_lite(&docs, count, iterations, seed))?;
        Ok(Self {
            inner: RetrievalIndex::PlaidLite(plaid),
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: to_py(load_index(path))?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        to_py(save_index(&self.inner, path))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    fn __len__(&self) -> usize {
        self.inner.docs().len()
    }

    /// FDE dimension of a flat index, `None` for PLAID-lite.
    #[getter]
    fn fde_dim(&self) -> Option<usize> {
        match &self.inner {
            RetrievalIndex::Flat(f) => Some(f.fde_dim()),
            RetrievalIndex::PlaidLite(_) => None,
        }
    }

    /// Returns `{query_id: [(doc_id, score), ...]}` ranked best first.
    /// `mode` is one of "exact", "plaid", "muvera", "muvera-rerank".
    #[pyo3(signature = (queries, mode, top_k = DEFAULT_TOP_K, rerank_k = DEFAULT_RERANK_DEPTH, candidates = None))]
    fn search(
        &self,
        queries: Vec<PyRef<'_, PyTokenMatrix>>,
        mode: &str,
        top_k: usize,
        rerank_k: usize,
        candidates: Option<usize>,
    ) -> PyResult<PyRun> {
        let mode = match mode {
            "exact" => PipelineMode::ExactFull,
            "plaid" => PipelineMode::PlaidLite {
                n_candidates: candidates.unwrap_or(top_k),
            },
            "muvera" => PipelineMode::Muvera,
            "muvera-rerank" => PipelineMode::MuveraRerank { depth: rerank_k },
            other => return Err(LateIndexError::new_err(format!("unknown mode {other:?}"))),
        };
        let searcher = to_py(Searcher::new(&self.inner, &PipelineConfig::new(mode, top_k)))?;
        let (run, _) = to_py(searcher.run(&matrices(&queries)))?;
        Ok(run_to_py(&run))
    }
}

#[pyfunction]
fn maxsim(query: &PyTokenMatrix, doc: &PyTokenMatrix) -> PyResult<f64> {
    to_py(scoring::maxsim(&query.inner, &doc.inner))
}

#[pyfunction]
fn encode_document(doc: &PyTokenMatrix, config: &PyEncodingConfig) -> PyResult<Vec<f32>> {
    let enc = to_py(FdeEncoder::new(config.inner))?;
    Ok(to_py(enc.encode_document(&doc.inner))?.values)
}

#[pyfunction]
fn encode_query(query: &PyTokenMatrix, config: &PyEncodingConfig) -> PyResult<Vec<f32>> {
    let enc = to_py(FdeEncoder::new(config.inner))?;
    Ok(to_py(enc.encode_query(&query.inner))?.values)
}

/// Macro-averaged metrics keyed like the CLI report (`ndcg@10`, `map`, ...).
#[pyfunction]
#[pyo3(signature = (run, qrels, cutoffs = DEFAULT_CUTOFFS.to_vec()))]
fn evaluate(run: PyRun, qrels: PyQrels, cutoffs: Vec<usize>) -> PyResult<BTreeMap<String, f64>> {
    let run = to_py(run_from_py(run))?;
    let report = to_py(evaluate_run(&run, &qrels_from_py(qrels), &cutoffs))?;
    let mut out = BTreeMap::new();
    for (i, k) in report.cutoffs.iter().enumerate() {
        out.insert(format!("ndcg@{k}"), report.ndcg[i]);
        out.insert(format!("recall@{k}"), report.recall[i]);
        out.insert(format!("precision@{k}"), report.precision[i]);
    }
    out.insert("map".into(), report.map);
    Ok(out)
}

/// Returns `(docs, queries, qrels)`.
#[pyfunction]
#[pyo3(signature = (num_docs, tokens_per_doc, num_queries, dim = 128, relevant_per_query = 5, seed = 0))]
fn synthetic_corpus(
    num_docs: usize,
    tokens_per_doc: usize,
    num_queries: usize,
    dim: usize,
    relevant_per_query: usize,
    seed: u64,
) -> PyResult<(Vec<PyTokenMatrix>, Vec<PyTokenMatrix>, PyQrels)> {
    let c = to_py(gen_synthetic_corpus(num_docs, tokens_per_doc, num_queries, dim, relevant_per_query, seed))?;
    let wrap = |ms: Vec<lateindex::TokenMatrix>| ms.into_iter().map(|inner| PyTokenMatrix { inner }).collect();
    Ok((wrap(c.docs), wrap(c.queries), qrels_to_py(&c.qrels)))
}

#[pyfunction]
fn load_embeddings(path: &str) -> PyResult<Vec<PyTokenMatrix>> {
    Ok(to_py(ingest::load_embeddings(path))?
        .into_iter()
        .map(|inner| PyTokenMatrix { inner })
        .collect())
}

#[pyfunction]
fn write_embeddings(matrices_in: Vec<PyRef<'_, PyTokenMatrix>>, path: &str) -> PyResult<()> {
    to_py(ingest::write_embeddings(&matrices(&matrices_in), path))
}

#[pymodule]
fn lateindex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LateIndexError", m.py().get_type::<LateIndexError>())?;
    m.add_class::<PyTokenMatrix>()?;
    m.add_class::<PyEncodingConfig>()?;
    m.add_class::<PyIndex>()?;
    m.add_function(wrap_pyfunction!(maxsim, m)?)?;
    m.add_function(wrap_pyfunction!(encode_document, m)?)?;
    m.add_function(wrap_pyfunction!(encode_query, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(load_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(write_embeddings, m)?)?;
    Ok(())
}
