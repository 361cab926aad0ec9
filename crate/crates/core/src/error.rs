use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty token matrix: {id}")]
    EmptyTokenMatrix { id: String },

    #[error("non-finite value in {id} at row {row}, column {col}")]
    NonFinite { id: String, row: usize, col: usize },

    #[error("dimension mismatch for {id}: expected {expected}, got {actual}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        actual: usize,
    },

    #[error("row {row} of {id} is not unit-normalized (norm {norm})")]
    NotNormalized { id: String, row: usize, norm: f64 },

    #[error("row {row} of {id} has zero norm and cannot be normalized")]
    ZeroNorm { id: String, row: usize },

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic in {path}")]
    BadMagic { path: PathBuf },

    #[error("unsupported version {version} in {path}")]
    BadVersion { path: PathBuf, version: u16 },

    #[error("truncated record in {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("truncated index: {0}")]
    TruncatedIndex(String),

    #[error("{path} line {line}: malformed line: {detail}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("{path} line {line}: negative grade {grade}")]
    NegativeGrade {
        path: PathBuf,
        line: usize,
        grade: i64,
    },

    #[error("{path} line {line}: conflicting judgment for ({qid}, {docid})")]
    ConflictingJudgment {
        path: PathBuf,
        line: usize,
        qid: String,
        docid: String,
    },

    #[error("role mismatch: expected {expected:?}, got {actual:?}")]
    RoleMismatch {
        expected: crate::model::Role,
        actual: crate::model::Role,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("index kind {index} cannot serve mode {mode}")]
    ModeMismatch { mode: String, index: String },

    #[error("rerank depth below top-k ({depth} < {top_k})")]
    RerankDepthBelowTopK { depth: usize, top_k: usize },

    #[error("candidate depth below top-k ({candidates} < {top_k})")]
    CandidatesBelowTopK { candidates: usize, top_k: usize },

    #[error("queries missing from qrels: {}", .0.join(", "))]
    QueriesMissingFromQrels(Vec<String>),

    #[error("query {0} missing from run")]
    QueryMissingFromRun(String),

    #[error("empty run")]
    EmptyRun,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path} line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
