use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::EncodingConfig;

const STREAM_PLANES: u64 = 1;
pub(crate) const STREAM_SKETCH: u64 = 2;

/// Deterministic random stream for one `(seed, purpose, repetition, index)` key.
///
/// The generator is ChaCha8 seeded from `seed` (expanded by `seed_from_u64`),
/// with the 64-bit stream id `purpose << 56 | repetition << 32 | index`.
/// ChaCha is counter based, so every key selects an independent, reproducible
/// sequence regardless of which other keys were drawn before.
pub(crate) fn keyed_rng(seed: u64, purpose: u64, repetition: usize, index: usize) -> ChaCha8Rng {
    debug_assert!(repetition < 1 << 24 && index <= u32::MAX as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 56) | ((repetition as u64) << 32) | index as u64);
    rng
}

/// Random Gaussian hyperplanes for one repetition. Plane `b` decides bit `b`
/// of the partition index (plane 0 is the least-significant bit).
#[derive(Debug, Clone, PartialEq)]
pub struct SimHashPlanes {
    dim: usize,
    normals: Vec<f32>,
}

impl SimHashPlanes {
    /// Builds planes from explicit normal vectors, each of length `dim`.
    pub fn from_normals(dim: usize, normals: Vec<Vec<f32>>) -> Result<Self> {
        let mut flat = Vec::with_capacity(dim * normals.len());
        for (i, g) in normals.iter().enumerate() {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    id: format!("plane {i}"),
                    expected: dim,
                    actual: g.len(),
                });
            }
            flat.extend_from_slice(g);
        }
        Ok(Self { dim, normals: flat })
    }

    pub fn k_sim(&self) -> usize {
        self.normals.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn plane(&self, b: usize) -> &[f32] {
        &self.normals[b * self.dim..(b + 1) * self.dim]
    }

    /// Partition index without the dimension check.
    #[inline]
    pub(crate) fn index_of(&self, e: &[f32]) -> usize {
        let mut idx = 0usize;
        for (b, g) in self.normals.chunks_exact(self.dim).enumerate() {
            // sign(0) counts as negative
            if crate::scoring::dot(g, e) > 0.0 {
                idx |= 1 << b;
            }
        }
        idx
    }
}

/// Samples the `k_sim` standard-normal hyperplanes of one repetition. Plane
/// `b` draws its `d` coordinates in order from the keyed stream
/// `(seed, planes, repetition, b)`, using `rand_distr`'s ziggurat sampler.
pub fn make_planes(config: &EncodingConfig, repetition: usize) -> Result<SimHashPlanes> {
    config.validate()?;
    if repetition >= config.repetitions {
        return Err(Error::InvalidConfig(format!(
            "repetition {repetition} out of range (repetitions = {})",
            config.repetitions
        )));
    }
    let dim = config.dim;
    let mut normals = Vec::with_capacity(dim * config.k_sim as usize);
    for b in 0..config.k_sim as usize {
        let mut rng = keyed_rng(config.seed, STREAM_PLANES, repetition, b);
        normals.extend((0..dim).map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x as f32
        }));
    }
    Ok(SimHashPlanes { dim, normals })
}

/// SimHash partition of `e`: bit `b` is set iff `<g_b, e> > 0`.
pub fn assign_partition(e: &[f32], planes: &SimHashPlanes) -> Result<usize> {
    if e.len() != planes.dim {
        return Err(Error::DimensionMismatch {
            id: "token".into(),
            expected: planes.dim,
            actual: e.len(),
        });
    }
    Ok(planes.index_of(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_bits_means_no_planes() {
        let planes = make_planes(&EncodingConfig::new(8, 0), 0).unwrap();
        assert_eq!(planes.k_sim(), 0);
        assert_eq!(assign_partition(&[0.5; 8], &planes).unwrap(), 0);
    }

    #[test]
    fn deterministic_per_seed_and_repetition() {
        let cfg = EncodingConfig::new(16, 3).with_repetitions(2).with_seed(1);
        assert_eq!(make_planes(&cfg, 0).unwrap(), make_planes(&cfg, 0).unwrap());
        assert_ne!(make_planes(&cfg, 0).unwrap(), make_planes(&cfg, 1).unwrap());
        let other = make_planes(&cfg.with_seed(2), 0).unwrap();
        let mine = make_planes(&cfg, 0).unwrap();
        let max_diff = mine
            .normals
            .iter()
            .zip(&other.normals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_diff > 0.0);
    }

    #[test]
    fn planes_look_standard_normal() {
        let cfg = EncodingConfig::new(4096, 2).with_seed(5);
        let p = make_planes(&cfg, 0).unwrap();
        let n = p.normals.len() as f64;
        let mean = p.normals.iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = p.normals.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn repetition_out_of_range() {
        assert!(make_planes(&EncodingConfig::new(4, 1), 1).is_err());
    }

    #[test]
    fn sign_pattern_bits() {
        let one = SimHashPlanes::from_normals(2, vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(assign_partition(&[0.5, -0.2], &one).unwrap(), 1);
        let two = SimHashPlanes::from_normals(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(assign_partition(&[-0.3, 0.4], &two).unwrap(), 2);
        // exactly zero dot product is a 0 bit
        assert_eq!(assign_partition(&[0.0, 0.0], &two).unwrap(), 0);
        assert!(assign_partition(&[1.0], &two).is_err());
    }
}
