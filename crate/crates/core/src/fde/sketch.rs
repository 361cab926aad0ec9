use rand::Rng;

use super::planes::{keyed_rng, STREAM_SKETCH};
use crate::error::{Error, Result};
use crate::model::{EncodingConfig, InnerProjection};

/// Count-sketch projection: coordinate `i` of the input is multiplied by
/// `signs[i]` and added into output bucket `buckets[i]`.
///
/// With independent uniform buckets and Rademacher signs,
/// `E[<S x, S y>] = <x, y>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    target_dim: usize,
    buckets: Vec<u32>,
    signs: Vec<f32>,
}

impl CountSketch {
    pub fn from_parts(target_dim: usize, buckets: Vec<u32>, signs: Vec<f32>) -> Result<Self> {
        if buckets.len() != signs.len() {
            return Err(Error::InvalidConfig("bucket and sign lengths differ".into()));
        }
        if target_dim == 0 || buckets.iter().any(|&b| b as usize >= target_dim) {
            return Err(Error::InvalidConfig(format!("bucket index outside [0, {target_dim})")));
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidConfig("signs must be +1 or -1".into()));
        }
        Ok(Self {
            target_dim,
            buckets,
            signs,
        })
    }

    /// Sketch for `(seed, repetition, partition)`: for each input coordinate in
    /// order, draw a bucket uniformly from `[0, target_dim)` and then a fair
    /// sign, both from the keyed stream.
    pub fn generate(seed: u64, repetition: usize, partition: usize, input_dim: usize, target_dim: usize) -> Self {
        let mut rng = keyed_rng(seed, STREAM_SKETCH, repetition, partition);
        let mut buckets = Vec::with_capacity(input_dim);
        let mut signs = Vec::with_capacity(input_dim);
        for _ in 0..input_dim {
            buckets.push(rng.random_range(0..target_dim as u32));
            signs.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
        }
        Self {
            target_dim,
            buckets,
            signs,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.buckets.len()
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn apply(&self, e: &[f32]) -> Vec<f32> {
        let mut out = vec![0.0f64; self.target_dim];
        self.accumulate(e, &mut out);
        out.into_iter().map(|v| v as f32).collect()
    }

    /// Adds the sketch of `e` into `out`.
    pub(crate) fn accumulate(&self, e: &[f32], out: &mut [f64]) {
        debug_assert_eq!(e.len(), self.buckets.len());
        for ((&x, &b), &s) in e.iter().zip(&self.buckets).zip(&self.signs) {
            out[b as usize] += (s * x) as f64;
        }
    }
}

/// Inner projection of token `e` for the given repetition and partition.
/// Identity returns `e`; sketch mode applies that partition's count sketch.
pub fn inner_project(e: &[f32], config: &EncodingConfig, repetition: usize, partition: usize) -> Result<Vec<f32>> {
    if e.len() != config.dim {
        return Err(Error::DimensionMismatch {
            id: "token".into(),
            expected: config.dim,
            actual: e.len(),
        });
    }
    match config.projection {
        InnerProjection::Identity => Ok(e.to_vec()),
        InnerProjection::SparseSketch { target_dim } => {
            config.validate()?;
            Ok(CountSketch::generate(config.seed, repetition, partition, config.dim, target_dim).apply(e))
        }
    }
}
