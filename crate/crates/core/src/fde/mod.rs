//! Fixed-dimensional encodings (FDEs) of token matrices.
//!
//! Per repetition, each token is hashed into one of `2^k_sim` partitions by
//! the sign pattern of its SimHash projections, passed through the inner
//! projection of that partition, and aggregated per partition: summed for
//! queries, averaged for documents. Document partitions that received no
//! token copy the block of the Hamming-nearest non-empty partition; query
//! partitions stay zero. Blocks are concatenated repetition-major, partitions
//! ascending, giving `repetitions * proj_dim * 2^k_sim` coordinates.

mod planes;
mod sketch;

pub use planes::{assign_partition, make_planes, SimHashPlanes};
pub use sketch::{inner_project, CountSketch};

use crate::error::{Error, Result};
use crate::model::{EncodingConfig, FdeVector, InnerProjection, Role, TokenMatrix};

/// Output dimension of the encoding.
pub fn fde_dim(config: &EncodingConfig) -> usize {
    config.fde_dim()
}

/// Token-to-partition mapping for one repetition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionAssignment {
    pub token_partition: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl PartitionAssignment {
    pub fn compute(m: &TokenMatrix, planes: &SimHashPlanes) -> Result<Self> {
        let mut members = vec![Vec::new(); 1 << planes.k_sim()];
        let mut token_partition = Vec::with_capacity(m.len());
        for (i, e) in m.rows().enumerate() {
            let p = assign_partition(e, planes)?;
            token_partition.push(p);
            members[p].push(i);
        }
        Ok(Self {
            token_partition,
            members,
        })
    }

    pub fn nonempty(&self) -> Vec<bool> {
        self.members.iter().map(|m| !m.is_empty()).collect()
    }
}

/// Fills every empty block with a copy of the block of the non-empty partition
/// at minimal Hamming distance, ties going to the smallest partition index.
///
/// `blocks` holds `nonempty.len()` consecutive blocks of `block_dim` values;
/// `nonempty.len()` must be `2^k_sim`.
pub fn impute_empty(blocks: &mut [f32], block_dim: usize, nonempty: &[bool]) -> Result<()> {
    let partitions = nonempty.len();
    if !partitions.is_power_of_two() || blocks.len() != partitions * block_dim {
        return Err(Error::InvalidConfig(format!(
            "{} values cannot hold {partitions} blocks of {block_dim}",
            blocks.len()
        )));
    }
    let sources: Vec<usize> = (0..partitions).filter(|&p| nonempty[p]).collect();
    if sources.is_empty() {
        return Err(Error::InvalidConfig("all partitions empty".into()));
    }
    if sources.len() == partitions {
        return Ok(());
    }
    for p in (0..partitions).filter(|&p| !nonempty[p]) {
        // sources is ascending, so min_by_key keeps the smallest index on ties
        let q = *sources
            .iter()
            .min_by_key(|&&q| (p ^ q).count_ones())
            .expect("sources non-empty");
        blocks.copy_within(q * block_dim..(q + 1) * block_dim, p * block_dim);
    }
    Ok(())
}

/// Precomputed randomness for one [`EncodingConfig`]: SimHash planes per
/// repetition and, in sketch mode, one count sketch per (repetition,
/// partition).
#[derive(Debug, Clone)]
pub struct FdeEncoder {
    config: EncodingConfig,
    planes: Vec<SimHashPlanes>,
    sketches: Vec<Vec<CountSketch>>,
}

impl FdeEncoder {
    pub fn new(config: EncodingConfig) -> Result<Self> {
        config.validate()?;
        let planes = (0..config.repetitions)
            .map(|r| make_planes(&config, r))
            .collect::<Result<Vec<_>>>()?;
        let sketches = match config.projection {
            InnerProjection::Identity => Vec::new(),
            InnerProjection::SparseSketch { target_dim } => (0..config.repetitions)
                .map(|r| {
                    (0..config.num_partitions())
                        .map(|p| CountSketch::generate(config.seed, r, p, config.dim, target_dim))
                        .collect()
                })
                .collect(),
        };
        Ok(Self {
            config,
            planes,
            sketches,
        })
    }

    pub fn config(&self) -> &EncodingConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.fde_dim()
    }

    pub fn planes(&self, repetition: usize) -> &SimHashPlanes {
        &self.planes[repetition]
    }

    pub fn encode_document(&self, m: &TokenMatrix) -> Result<FdeVector> {
        self.encode(m, Role::Document)
    }

    pub fn encode_query(&self, m: &TokenMatrix) -> Result<FdeVector> {
        self.encode(m, Role::Query)
    }

    fn encode(&self, m: &TokenMatrix, role: Role) -> Result<FdeVector> {
        if m.dim() != self.config.dim {
            return Err(Error::DimensionMismatch {
                id: m.id().to_string(),
                expected: self.config.dim,
                actual: m.dim(),
            });
        }
        if m.is_empty() {
            return Err(Error::EmptyTokenMatrix { id: m.id().to_string() });
        }
        let partitions = self.config.num_partitions();
        let block_dim = self.config.proj_dim();
        let rep_dim = partitions * block_dim;
        let mut values = vec![0.0f32; self.dim()];
        let mut acc = vec![0.0f64; rep_dim];
        let mut counts = vec![0usize; partitions];

        for (r, planes) in self.planes.iter().enumerate() {
            acc.iter_mut().for_each(|v| *v = 0.0);
            counts.iter_mut().for_each(|c| *c = 0);
            for e in m.rows() {
                let p = planes.index_of(e);
                counts[p] += 1;
                let block = &mut acc[p * block_dim..(p + 1) * block_dim];
                match self.sketches.get(r) {
                    None => {
                        for (a, &x) in block.iter_mut().zip(e) {
                            *a += x as f64;
                        }
                    }
                    Some(sketches) => sketches[p].accumulate(e, block),
                }
            }

            let out = &mut values[r * rep_dim..(r + 1) * rep_dim];
            for p in 0..partitions {
                let scale = match role {
                    Role::Query => 1.0,
                    Role::Document if counts[p] > 0 => 1.0 / counts[p] as f64,
                    Role::Document => 0.0,
                };
                for (o, a) in out[p * block_dim..(p + 1) * block_dim]
                    .iter_mut()
                    .zip(&acc[p * block_dim..(p + 1) * block_dim])
                {
                    *o = (*a * scale) as f32;
                }
            }
            if role == Role::Document {
                let nonempty: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
                impute_empty(out, block_dim, &nonempty)?;
            }
        }

        Ok(FdeVector {
            id: m.id().to_string(),
            role,
            values,
        })
    }
}

pub fn encode_document(m: &TokenMatrix, config: &EncodingConfig) -> Result<FdeVector> {
    FdeEncoder::new(*config)?.encode_document(m)
}

pub fn encode_query(m: &TokenMatrix, config: &EncodingConfig) -> Result<FdeVector> {
    FdeEncoder::new(*config)?.encode_query(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{dot, fde_score};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, id: &str, n: usize, dim: usize) -> TokenMatrix {
        let v: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        TokenMatrix::normalized(id, dim, v).unwrap()
    }

    /// Straight-line reference: explicit partition lists, per-partition mean or
    /// sum, and exhaustive Hamming search for empty document partitions.
    fn reference(m: &TokenMatrix, cfg: &EncodingConfig, role: Role) -> Vec<f64> {
        let parts = 1usize << cfg.k_sim;
        let mut out = Vec::new();
        for r in 0..cfg.repetitions {
            let planes = make_planes(cfg, r).unwrap();
            let mut lists: Vec<Vec<Vec<f64>>> = vec![Vec::new(); parts];
            for i in 0..m.len() {
                let e = m.row(i);
                let mut p = 0;
                for b in 0..cfg.k_sim as usize {
                    let s: f64 = planes.plane(b).iter().zip(e).map(|(g, x)| *g as f64 * *x as f64).sum();
                    if s > 0.0 {
                        p += 1 << b;
                    }
                }
                let z = inner_project(e, cfg, r, p).unwrap();
                lists[p].push(z.iter().map(|&v| v as f64).collect());
            }
            let bd = cfg.proj_dim();
            let mut blocks: Vec<Option<Vec<f64>>> = lists
                .iter()
                .map(|l| {
                    if l.is_empty() {
                        return None;
                    }
                    let mut s = vec![0.0; bd];
                    for z in l {
                        for j in 0..bd {
                            s[j] += z[j];
                        }
                    }
                    if role == Role::Document {
                        s.iter_mut().for_each(|v| *v /= l.len() as f64);
                    }
                    Some(s)
                })
                .collect();
            let filled = blocks.clone();
            for p in 0..parts {
                if blocks[p].is_none() {
                    blocks[p] = Some(match role {
                        Role::Query => vec![0.0; bd],
                        Role::Document => {
                            let mut best = None;
                            for q in 0..parts {
                                if let Some(b) = &filled[q] {
                                    let h = (p ^ q).count_ones();
                                    if best.as_ref().map_or(true, |(bh, _)| h < *bh) {
                                        best = Some((h, b.clone()));
                                    }
                                }
                            }
                            best.unwrap().1
                        }
                    });
                }
            }
            for b in blocks {
                out.extend(b.unwrap());
            }
        }
        out
    }

    #[test]
    fn single_partition_is_mean_or_sum() {
        let m = TokenMatrix::normalized("d", 3, vec![1.0, 0.0, 0.0, 0.0, 3.0, 4.0]).unwrap();
        let cfg = EncodingConfig::new(3, 0);
        let d = encode_document(&m, &cfg).unwrap();
        assert_eq!(d.values, vec![0.5, 0.3, 0.4]);
        assert_eq!(d.role, Role::Document);
        let q = encode_query(&m, &cfg).unwrap();
        assert_eq!(q.values, vec![1.0, 0.6, 0.8]);
    }

    #[test]
    fn single_token_document_fills_every_block() {
        let m = TokenMatrix::normalized("d", 4, vec![0.2, -0.4, 0.1, 0.9]).unwrap();
        let f = encode_document(&m, &EncodingConfig::new(4, 2).with_seed(3)).unwrap();
        for block in f.values.chunks(4) {
            assert_eq!(block, m.row(0));
        }
    }

    #[test]
    fn query_never_imputes() {
        let cfg = EncodingConfig::new(4, 2).with_seed(17);
        let enc = FdeEncoder::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // find a token landing in partition 3, then build a query from copies
        let token = loop {
            let t = random_matrix(&mut rng, "t", 1, 4);
            if enc.planes(0).index_of(t.row(0)) == 3 {
                break t;
            }
        };
        let mut values = token.values().to_vec();
        values.extend_from_slice(token.values());
        let q = TokenMatrix::new("q", 4, values).unwrap();
        let f = enc.encode_query(&q).unwrap();
        assert!(f.values[..12].iter().all(|&v| v == 0.0));
        assert_ne!(&f.values[12..], &[0.0; 4]);
    }

    #[test]
    fn matches_reference_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (k, reps, proj) in [
            (2, 1, InnerProjection::Identity),
            (3, 2, InnerProjection::Identity),
            (2, 2, InnerProjection::SparseSketch { target_dim: 2 }),
        ] {
            let cfg = EncodingConfig::new(4, k)
                .with_seed(rng.random())
                .with_repetitions(reps)
                .with_projection(proj);
            for n in [1, 3, 8] {
                let m = random_matrix(&mut rng, "x", n, 4);
                for role in [Role::Document, Role::Query] {
                    let got = match role {
                        Role::Document => encode_document(&m, &cfg).unwrap(),
                        Role::Query => encode_query(&m, &cfg).unwrap(),
                    };
                    let want = reference(&m, &cfg, role);
                    assert_eq!(got.dim(), cfg.fde_dim());
                    for (g, w) in got.values.iter().zip(&want) {
                        assert!((*g as f64 - w).abs() < 1e-6, "{g} vs {w}");
                    }
                }
            }
        }
    }

    #[test]
    fn imputation_single_candidate_and_tie_break() {
        let mut blocks = vec![7.0, 0.0, 0.0, 0.0];
        impute_empty(&mut blocks, 1, &[true, false, false, false]).unwrap();
        assert_eq!(blocks, vec![7.0; 4]);

        let mut blocks = vec![0.0, 1.0, 2.0, 0.0];
        impute_empty(&mut blocks, 1, &[false, true, true, false]).unwrap();
        // partition 3 is one bit from both 1 and 2; the smaller wins
        assert_eq!(blocks[3], 1.0);
        // partition 0 is one bit from both as well
        assert_eq!(blocks[0], 1.0);
    }

    #[test]
    fn imputation_rejects_all_empty() {
        let mut blocks = vec![0.0; 4];
        assert!(impute_empty(&mut blocks, 1, &[false; 4]).is_err());
        assert!(impute_empty(&mut blocks, 1, &[true; 3]).is_err());
    }

    #[test]
    fn imputation_matches_exhaustive_oracle_k3() {
        for mask in 1u32..256 {
            let nonempty: Vec<bool> = (0..8).map(|p| mask >> p & 1 == 1).collect();
            let mut blocks: Vec<f32> = (0..8).map(|p| if nonempty[p] { p as f32 + 1.0 } else { 0.0 }).collect();
            impute_empty(&mut blocks, 1, &nonempty).unwrap();
            for p in 0..8 {
                let mut best = (u32::MAX, usize::MAX);
                for q in 0..8 {
                    if nonempty[q] && ((p ^ q).count_ones(), q) < best {
                        best = ((p ^ q).count_ones(), q);
                    }
                }
                assert_eq!(blocks[p], best.1 as f32 + 1.0, "mask {mask:#b} p {p}");
            }
        }
    }

    #[test]
    fn k0_score_is_sum_of_query_dots_with_doc_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = EncodingConfig::new(6, 0);
        let q = random_matrix(&mut rng, "q", 5, 6);
        let d = random_matrix(&mut rng, "d", 7, 6);
        let mut mean = vec![0.0f64; 6];
        for r in d.rows() {
            for (m, &x) in mean.iter_mut().zip(r) {
                *m += x as f64 / d.len() as f64;
            }
        }
        let want: f64 = q.rows().map(|r| r.iter().zip(&mean).map(|(a, b)| *a as f64 * b).sum::<f64>()).sum();
        let got = fde_score(&encode_query(&q, &cfg).unwrap(), &encode_document(&d, &cfg).unwrap()).unwrap();
        assert!((got - want).abs() < 1e-6);
    }

    #[test]
    fn permutation_invariant_and_score_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = EncodingConfig::new(8, 3).with_seed(4);
        let enc = FdeEncoder::new(cfg).unwrap();
        for _ in 0..20 {
            let d = random_matrix(&mut rng, "d", 9, 8);
            let q = random_matrix(&mut rng, "q", 4, 8);
            let mut rev = Vec::new();
            for i in (0..d.len()).rev() {
                rev.extend_from_slice(d.row(i));
            }
            let dr = TokenMatrix::new("d", 8, rev).unwrap();
            let a = enc.encode_document(&d).unwrap();
            let b = enc.encode_document(&dr).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-6);
            }
            let s = dot(&enc.encode_query(&q).unwrap().values, &a.values);
            assert!(s <= q.len() as f64 + 1e-4);
        }
    }

    #[test]
    fn full_partitions_need_no_imputation() {
        // with k_sim = 1 and tokens on both sides of the plane, both blocks are
        // plain means
        let cfg = EncodingConfig::new(2, 1).with_seed(0);
        let enc = FdeEncoder::new(cfg).unwrap();
        let g = enc.planes(0).plane(0).to_vec();
        let n = (g[0] as f64).hypot(g[1] as f64);
        let u = [(g[0] as f64 / n) as f32, (g[1] as f64 / n) as f32];
        let m = TokenMatrix::new("d", 2, vec![u[0], u[1], -u[0], -u[1]]).unwrap();
        let f = enc.encode_document(&m).unwrap();
        assert_eq!(&f.values[..2], &[-u[0], -u[1]]);
        assert_eq!(&f.values[2..], &u);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let m = TokenMatrix::new("d", 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            encode_document(&m, &EncodingConfig::new(3, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
