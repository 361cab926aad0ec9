use std::time::Instant;

use rayon::prelude::*;

use super::{check_corpus, corpus_hash, scored, top_k_indices, BuildMeta};
use crate::error::{Error, Result};
use crate::fde::FdeEncoder;
use crate::model::{EncodingConfig, FdeVector, Role, ScoredDoc, TokenMatrix};
use crate::scoring::dot;

/// Document FDEs stored row-major next to the token matrices they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatFdeIndex {
    config: EncodingConfig,
    docs: Vec<TokenMatrix>,
    fdes: Vec<f32>,
    pub(super) meta: BuildMeta,
}

impl FlatFdeIndex {
    pub(crate) fn from_parts(config: EncodingConfig, docs: Vec<TokenMatrix>, fdes: Vec<f32>, meta: BuildMeta) -> Self {
        debug_assert_eq!(fdes.len(), docs.len() * config.fde_dim());
        Self {
            config,
            docs,
            fdes,
            meta,
        }
    }

    pub fn config(&self) -> &EncodingConfig {
        &self.config
    }

    pub fn fde_dim(&self) -> usize {
        self.config.fde_dim()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[TokenMatrix] {
        &self.docs
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(TokenMatrix::id)
    }

    pub fn fde_matrix(&self) -> &[f32] {
        &self.fdes
    }

    pub fn fde_row(&self, i: usize) -> &[f32] {
        let d = self.fde_dim();
        &self.fdes[i * d..(i + 1) * d]
    }

    pub fn meta(&self) -> &BuildMeta {
        &self.meta
    }

    pub fn encoder(&self) -> Result<FdeEncoder> {
        FdeEncoder::new(self.config)
    }

    /// Inner product of `query` against every row, in row order.
    pub fn scores(&self, query: &[f32]) -> Vec<f64> {
        self.fdes
            .chunks_exact(self.fde_dim())
            .map(|row| dot(query, row))
            .collect()
    }
}

/// Encodes every document (in parallel) into a flat FDE matrix.
pub fn build_flat_index(corpus: &[TokenMatrix], config: &EncodingConfig) -> Result<FlatFdeIndex> {
    let start = Instant::now();
    check_corpus(corpus, Some(config.dim))?;
    let encoder = FdeEncoder::new(*config)?;
    let rows: Vec<FdeVector> = corpus
        .par_iter()
        .map(|m| encoder.encode_document(m))
        .collect::<Result<_>>()?;
    let mut fdes = Vec::with_capacity(corpus.len() * config.fde_dim());
    for row in rows {
        fdes.extend_from_slice(&row.values);
    }
    let meta = BuildMeta {
        corpus_hash: corpus_hash(corpus),
        build_ms: Some(start.elapsed().as_secs_f64() * 1e3),
    };
    Ok(FlatFdeIndex::from_parts(*config, corpus.to_vec(), fdes, meta))
}

/// Exhaustive inner-product scan; best `top_k` by (score desc, doc id asc).
pub fn search_flat(index: &FlatFdeIndex, query: &FdeVector, top_k: usize) -> Result<Vec<ScoredDoc>> {
    if query.role != Role::Query {
        return Err(Error::RoleMismatch {
            expected: Role::Query,
            actual: query.role,
        });
    }
    if query.dim() != index.fde_dim() {
        return Err(Error::DimensionMismatch {
            id: query.id.clone(),
            expected: index.fde_dim(),
            actual: query.dim(),
        });
    }
    let scores = index.scores(&query.values);
    let ids: Vec<&str> = index.doc_ids().collect();
    Ok(scored(&top_k_indices(&scores, &ids, top_k), &scores, &ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fde::encode_document;
    use crate::synth::gen_synthetic_corpus;

    #[test]
    fn single_doc_k0_is_token_mean() {
        let doc = TokenMatrix::normalized("d", 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let idx = build_flat_index(&[doc], &EncodingConfig::new(2, 0)).unwrap();
        assert_eq!(idx.fde_matrix(), &[0.5, 0.5]);
        assert!(idx.meta().build_ms.is_some());
    }

    #[test]
    fn rows_equal_per_document_encoding() {
        let c = gen_synthetic_corpus(100, 6, 1, 8, 1, 3).unwrap();
        let cfg = EncodingConfig::new(8, 2).with_seed(12);
        let idx = build_flat_index(&c.docs, &cfg).unwrap();
        let again = build_flat_index(&c.docs, &cfg).unwrap();
        assert_eq!(idx.fde_matrix(), again.fde_matrix());
        for (i, d) in c.docs.iter().enumerate() {
            assert_eq!(idx.fde_row(i), encode_document(d, &cfg).unwrap().values.as_slice());
        }
    }

    #[test]
    fn search_matches_naive_scan_and_prefixes() {
        let c = gen_synthetic_corpus(40, 5, 3, 8, 2, 9).unwrap();
        let cfg = EncodingConfig::new(8, 2).with_seed(1);
        let idx = build_flat_index(&c.docs, &cfg).unwrap();
        let enc = idx.encoder().unwrap();
        for q in &c.queries {
            let qf = enc.encode_query(q).unwrap();
            let full = search_flat(&idx, &qf, 1000).unwrap();
            assert_eq!(full.len(), 40);
            let mut naive: Vec<(f64, String)> = (0..idx.len())
                .map(|i| {
                    let s: f64 = qf.values.iter().zip(idx.fde_row(i)).map(|(a, b)| *a as f64 * *b as f64).sum();
                    (s, idx.docs()[i].id().to_string())
                })
                .collect();
            naive.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            for (hit, (s, id)) in full.iter().zip(&naive) {
                assert_eq!(&hit.doc_id, id);
                assert!((hit.score - s).abs() < 1e-9);
            }
            for k in [1, 5, 17] {
                assert_eq!(search_flat(&idx, &qf, k).unwrap(), full[..k]);
            }
        }
    }

    #[test]
    fn identical_normalized_row_ranks_first() {
        let c = gen_synthetic_corpus(20, 3, 1, 8, 1, 4).unwrap();
        let cfg = EncodingConfig::new(8, 0);
        let idx = build_flat_index(&c.docs, &cfg).unwrap();
        // unit-normalize rows so Cauchy-Schwarz makes self the unique best
        let unit: Vec<TokenMatrix> = (0..idx.len())
            .map(|i| TokenMatrix::normalized(idx.docs()[i].id(), 8, idx.fde_row(i).to_vec()).unwrap())
            .collect();
        let idx = build_flat_index(&unit, &cfg).unwrap();
        for target in [0, 7, 19] {
            let qf = FdeVector {
                id: "q".into(),
                role: Role::Query,
                values: idx.fde_row(target).to_vec(),
            };
            assert_eq!(search_flat(&idx, &qf, 1).unwrap()[0].doc_id, idx.docs()[target].id());
        }
    }

    #[test]
    fn errors() {
        let doc = TokenMatrix::new("d", 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(build_flat_index(&[], &EncodingConfig::new(2, 0)), Err(Error::EmptyCorpus)));
        assert!(matches!(
            build_flat_index(std::slice::from_ref(&doc), &EncodingConfig::new(3, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
        let idx = build_flat_index(&[doc], &EncodingConfig::new(2, 1)).unwrap();
        let bad = FdeVector { id: "q".into(), role: Role::Query, values: vec![0.0; 3] };
        assert!(matches!(search_flat(&idx, &bad, 1), Err(Error::DimensionMismatch { .. })));
    }
}
