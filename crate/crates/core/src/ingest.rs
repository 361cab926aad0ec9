//! Embedding, qrels and run file formats.
//!
//! Binary embeddings (little-endian throughout):
//!
//! ```text
//! header:  magic "TCTE" | version u16 = 1 | d u32 | record_count u64
//! record:  id_len u16 | id (UTF-8) | n u32 | n * d f32
//! ```
//!
//! Files ending in `.jsonl` hold one `{"id": ..., "vectors": [[...], ...]}`
//! object per line instead. Rows are L2-normalized on load; writers store the
//! values they are given.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Qrels, RunResult, ScoredDoc, TokenMatrix};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"TCTE";
pub const EMBEDDING_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingFileHeader {
    pub dim: u32,
    pub record_count: u64,
}

impl EmbeddingFileHeader {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&self.dim.to_le_bytes());
        out.extend_from_slice(&self.record_count.to_le_bytes());
    }
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("jsonl"))
}

/// Loads token matrices in file order, normalizing every row.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<TokenMatrix>> {
    let path = path.as_ref();
    let matrices = if is_jsonl(path) {
        load_jsonl(path)?
    } else {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        decode_binary(path, &bytes)?
    };
    let mut seen = HashSet::with_capacity(matrices.len());
    for m in &matrices {
        if !seen.insert(m.id()) {
            return Err(Error::DuplicateId(m.id().to_string()));
        }
    }
    Ok(matrices)
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                detail: format!("expected {n} bytes of {what} at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn decode_binary(path: &Path, bytes: &[u8]) -> Result<Vec<TokenMatrix>> {
    if bytes.len() < 4 || &bytes[..4] != EMBEDDING_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let mut r = Reader { path, bytes, pos: 4 };
    let version = r.u16("version")?;
    if version != EMBEDDING_VERSION {
        return Err(Error::BadVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let dim = r.u32("dimension")? as usize;
    if dim == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: "dimension 0".into(),
        });
    }
    let count = r.u64("record count")?;
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    for rec in 0..count {
        let id_len = r.u16("id length")? as usize;
        let id = std::str::from_utf8(r.take(id_len, "id")?).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: format!("record {rec}: id is not UTF-8: {e}"),
        })?;
        let n = r.u32("token count")? as usize;
        let raw = r.take(n * dim * 4, "token values")?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(TokenMatrix::normalized(id, dim, values)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("{} trailing bytes after {count} records", bytes.len() - r.pos),
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    vectors: Vec<Vec<f32>>,
}

fn load_jsonl(path: &Path) -> Result<Vec<TokenMatrix>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut dim = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        let d = rec.vectors.first().map_or(0, Vec::len);
        let expected = *dim.get_or_insert(d);
        if let Some(v) = rec.vectors.iter().find(|v| v.len() != expected) {
            return Err(Error::DimensionMismatch {
                id: rec.id,
                expected,
                actual: v.len(),
            });
        }
        let values = rec.vectors.into_iter().flatten().collect();
        out.push(TokenMatrix::normalized(rec.id, expected, values)?);
    }
    Ok(out)
}

/// Writes matrices in the binary format, or as JSONL when the path ends in
/// `.jsonl`. All matrices must share one dimension.
pub fn write_embeddings(ms: &[TokenMatrix], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = ms.first().map_or(crate::model::DEFAULT_DIM, TokenMatrix::dim);
    if let Some(m) = ms.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch {
            id: m.id().to_string(),
            expected: dim,
            actual: m.dim(),
        });
    }
    let bytes = if is_jsonl(path) {
        let mut out = Vec::new();
        for m in ms {
            let rec = JsonRecord {
                id: m.id().to_string(),
                vectors: m.rows().map(<[f32]>::to_vec).collect(),
            };
            serde_json::to_writer(&mut out, &rec).expect("serializing plain data");
            out.push(b'\n');
        }
        out
    } else {
        encode_binary(ms, dim)?
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn encode_binary(ms: &[TokenMatrix], dim: usize) -> Result<Vec<u8>> {
    let payload: usize = ms.iter().map(|m| 2 + m.id().len() + 4 + 4 * m.values().len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + payload);
    EmbeddingFileHeader {
        dim: dim as u32,
        record_count: ms.len() as u64,
    }
    .encode(&mut out);
    for m in ms {
        let id_len = u16::try_from(m.id().len())
            .map_err(|_| Error::InvalidConfig(format!("id longer than 65535 bytes: {}", m.id())))?;
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(m.id().as_bytes());
        out.extend_from_slice(&(m.len() as u32).to_le_bytes());
        for v in m.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Reads TREC qrels: `qid iter docid grade` per non-empty line.
pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qrels(path, &text)
}

pub fn parse_qrels(path: &Path, text: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = |detail: String| Error::MalformedLine {
            path: path.to_path_buf(),
            line: line_no,
            detail,
        };
        let [qid, _iter, docid, grade] = fields[..] else {
            return Err(malformed(format!("expected 4 fields, found {}", fields.len())));
        };
        let grade: i64 = grade
            .parse()
            .map_err(|_| malformed(format!("grade {grade:?} is not an integer")))?;
        if grade < 0 {
            return Err(Error::NegativeGrade {
                path: path.to_path_buf(),
                line: line_no,
                grade,
            });
        }
        let grade = u32::try_from(grade).map_err(|_| malformed(format!("grade {grade} out of range")))?;
        if let Some(prev) = qrels.insert(qid, docid, grade) {
            if prev != grade {
                return Err(Error::ConflictingJudgment {
                    path: path.to_path_buf(),
                    line: line_no,
                    qid: qid.to_string(),
                    docid: docid.to_string(),
                });
            }
        }
    }
    Ok(qrels)
}

pub fn write_qrels(qrels: &Qrels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (qid, docs) in qrels.iter() {
        for (docid, grade) in docs {
            writeln!(out, "{qid} 0 {docid} {grade}").unwrap();
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Formats a run as TREC lines `qid Q0 docid rank score tag`.
pub fn format_run(run: &RunResult, tag: &str) -> String {
    let mut out = String::new();
    for (qid, hits) in run.iter() {
        for (rank, h) in hits.iter().enumerate() {
            writeln!(out, "{qid} Q0 {} {} {:.6} {tag}", h.doc_id, rank + 1, h.score).unwrap();
        }
    }
    out
}

pub fn write_run(run: &RunResult, tag: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(format_run(run, tag).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a TREC run, keeping each query's documents in rank-column order.
pub fn load_run(path: impl AsRef<Path>) -> Result<RunResult> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut per_query: std::collections::BTreeMap<String, Vec<(u64, ScoredDoc)>> = Default::default();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = |detail: String| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            detail,
        };
        let [qid, _q0, docid, rank, score, _tag] = fields[..] else {
            return Err(malformed(format!("expected 6 fields, found {}", fields.len())));
        };
        let rank: u64 = rank.parse().map_err(|_| malformed(format!("bad rank {rank:?}")))?;
        let score: f64 = score.parse().map_err(|_| malformed(format!("bad score {score:?}")))?;
        per_query
            .entry(qid.to_string())
            .or_default()
            .push((rank, ScoredDoc::new(docid, score)));
    }
    let mut run = RunResult::new();
    for (qid, mut hits) in per_query {
        hits.sort_by_key(|(rank, _)| *rank);
        run.insert_ranked(qid, hits.into_iter().map(|(_, h)| h).collect())?;
    }
    Ok(run)
}
