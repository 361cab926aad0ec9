//! Index file layout (little-endian):
//!
//! ```text
//! magic "TCIX" | version u16 | kind u8 (0 = flat, 1 = plaid-lite)
//! flat:   d u32 | k_sim u32 | repetitions u32 | projection u8 (0 identity,
//!         1 sketch) | sketch_dim u32 | seed u64 | corpus sha256 [32]
//!         | docs | fde_dim u64 | num_docs * fde_dim f32
//! plaid:  d u32 | centroids u32 | iterations u32 | seed u64
//!         | corpus sha256 [32] | docs | centroids * d f32
//!         | token_count u64 | token_count u32 assignments
//! docs:   count u64, then per doc: id_len u16 | id | n u32 | n * d f32
//! ```

use std::path::Path;

use super::{BuildMeta, FlatFdeIndex, PlaidLiteIndex, RetrievalIndex};
use crate::error::{Error, Result};
use crate::model::{EncodingConfig, InnerProjection, TokenMatrix};

pub const INDEX_MAGIC: &[u8; 4] = b"TCIX";
pub const INDEX_VERSION: u16 = 1;

const KIND_FLAT: u8 = 0;
const KIND_PLAID: u8 = 1;

struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn docs(&mut self, docs: &[TokenMatrix]) -> Result<()> {
        self.u64(docs.len() as u64);
        for d in docs {
            let len = u16::try_from(d.id().len())
                .map_err(|_| Error::InvalidConfig(format!("id longer than 65535 bytes: {}", d.id())))?;
            self.u16(len);
            self.0.extend_from_slice(d.id().as_bytes());
            self.u32(d.len() as u32);
            self.f32s(d.values());
        }
        Ok(())
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} {v} does not fit in 32 bits")))
}

/// Canonical byte encoding of an index.
pub fn index_to_bytes(index: &RetrievalIndex) -> Result<Vec<u8>> {
    let mut out = Out(Vec::new());
    out.0.extend_from_slice(INDEX_MAGIC);
    out.u16(INDEX_VERSION);
    match index {
        RetrievalIndex::Flat(idx) => {
            let c = idx.config();
            out.u8(KIND_FLAT);
            out.u32(to_u32(c.dim, "dimension")?);
            out.u32(c.k_sim);
            out.u32(to_u32(c.repetitions, "repetitions")?);
            match c.projection {
                InnerProjection::Identity => {
                    out.u8(0);
                    out.u32(0);
                }
                InnerProjection::SparseSketch { target_dim } => {
                    out.u8(1);
                    out.u32(to_u32(target_dim, "sketch dimension")?);
                }
            }
            out.u64(c.seed);
            out.0.extend_from_slice(&idx.meta().corpus_hash);
            out.docs(idx.docs())?;
            out.u64(idx.fde_dim() as u64);
            out.f32s(idx.fde_matrix());
        }
        RetrievalIndex::PlaidLite(idx) => {
            out.u8(KIND_PLAID);
            out.u32(to_u32(idx.dim(), "dimension")?);
            out.u32(to_u32(idx.num_centroids(), "centroid count")?);
            out.u32(to_u32(idx.iterations(), "iterations")?);
            out.u64(idx.seed());
            out.0.extend_from_slice(&idx.meta().corpus_hash);
            out.docs(idx.docs())?;
            out.f32s(idx.centroids());
            out.u64(idx.token_count() as u64);
            for &a in idx.assignments() {
                out.u32(a);
            }
        }
    }
    Ok(out.0)
}

pub fn save_index(index: &RetrievalIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, index_to_bytes(index)?).map_err(|e| Error::io(path, e))
}

struct In<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::TruncatedIndex(format!(
                "needed {n} bytes of {what} at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
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
    fn len(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| Error::TruncatedIndex(format!("{what} overflows")))
    }
    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes_needed = n
            .checked_mul(4)
            .ok_or_else(|| Error::TruncatedIndex(format!("{what} overflows")))?;
        Ok(self
            .take(bytes_needed, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn hash(&mut self) -> Result<[u8; 32]> {
        Ok(self.take(32, "corpus hash")?.try_into().unwrap())
    }
    fn docs(&mut self, dim: usize) -> Result<Vec<TokenMatrix>> {
        let count = self.len("document count")?;
        let mut docs = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id_len = self.u16("id length")? as usize;
            let id = std::str::from_utf8(self.take(id_len, "id")?)
                .map_err(|e| Error::InvalidConfig(format!("index id is not UTF-8: {e}")))?
                .to_string();
            let n = self.u32("token count")? as usize;
            let values = self.f32s(n * dim, "token values")?;
            docs.push(TokenMatrix::new(id, dim, values)?);
        }
        Ok(docs)
    }
}

pub fn index_from_bytes(bytes: &[u8], origin: &Path) -> Result<RetrievalIndex> {
    if bytes.len() < 4 || &bytes[..4] != INDEX_MAGIC {
        return Err(Error::BadMagic {
            path: origin.to_path_buf(),
        });
    }
    let mut r = In { bytes, pos: 4 };
    let version = r.u16("version")?;
    if version != INDEX_VERSION {
        return Err(Error::BadVersion {
            path: origin.to_path_buf(),
            version,
        });
    }
    let index = match r.u8("index kind")? {
        KIND_FLAT => {
            let dim = r.u32("dimension")? as usize;
            let k_sim = r.u32("k_sim")?;
            let repetitions = r.u32("repetitions")? as usize;
            let projection = match (r.u8("projection")?, r.u32("sketch dimension")?) {
                (0, _) => InnerProjection::Identity,
                (1, t) => InnerProjection::SparseSketch { target_dim: t as usize },
                (p, _) => return Err(Error::InvalidConfig(format!("unknown projection tag {p}"))),
            };
            let seed = r.u64("seed")?;
            let config = EncodingConfig {
                dim,
                k_sim,
                repetitions,
                projection,
                seed,
            };
            config.validate()?;
            let corpus_hash = r.hash()?;
            let docs = r.docs(dim)?;
            let fde_dim = r.len("fde dimension")?;
            if fde_dim != config.fde_dim() {
                return Err(Error::DimensionMismatch {
                    id: "index".into(),
                    expected: config.fde_dim(),
                    actual: fde_dim,
                });
            }
            let fdes = r.f32s(docs.len() * fde_dim, "fde matrix")?;
            let meta = BuildMeta {
                corpus_hash,
                build_ms: None,
            };
            RetrievalIndex::Flat(FlatFdeIndex::from_parts(config, docs, fdes, meta))
        }
        KIND_PLAID => {
            let dim = r.u32("dimension")? as usize;
            let k = r.u32("centroid count")? as usize;
            let iterations = r.u32("iterations")? as usize;
            let seed = r.u64("seed")?;
            let corpus_hash = r.hash()?;
            if dim == 0 {
                return Err(Error::InvalidConfig("index dimension 0".into()));
            }
            let docs = r.docs(dim)?;
            let centroids = r.f32s(k * dim, "centroids")?;
            let tokens = r.len("token count")?;
            let raw = r.take(
                tokens
                    .checked_mul(4)
                    .ok_or_else(|| Error::TruncatedIndex("token count overflows".into()))?,
                "assignments",
            )?;
            let assignments = raw
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let meta = BuildMeta {
                corpus_hash,
                build_ms: None,
            };
            RetrievalIndex::PlaidLite(PlaidLiteIndex::from_parts(
                dim,
                centroids,
                assignments,
                docs,
                iterations,
                seed,
                meta,
            )?)
        }
        other => return Err(Error::InvalidConfig(format!("unknown index kind {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            detail: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(index)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<RetrievalIndex> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    index_from_bytes(&bytes, path)
}
