use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scoring::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub dim: usize,
    /// `k * dim` values, each row unit-normalized.
    pub centroids: Vec<f32>,
    /// Nearest centroid of every input point under the returned centroids.
    pub assignments: Vec<u32>,
    pub iterations: usize,
}

impl KMeans {
    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum()
}

/// Centroid with the largest inner product with `x`; ties go to the lower
/// index. For unit centroids this is also the L2-nearest one.
pub fn nearest_centroid(x: &[f32], centroids: &[f32], dim: usize) -> u32 {
    let mut best = (f64::NEG_INFINITY, 0u32);
    for (c, row) in centroids.chunks_exact(dim).enumerate() {
        let s = dot(x, row);
        if s > best.0 {
            best = (s, c as u32);
        }
    }
    best.1
}

fn l2_nearest(x: &[f32], centroids: &[f32], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (c, row) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, then each next centre drawn with
/// probability proportional to squared distance from the nearest chosen one.
fn seed_centroids(points: &[f32], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.extend_from_slice(row(first));
    let mut min_d: Vec<f64> = (0..n).into_par_iter().map(|i| sq_dist(row(i), row(first))).collect();

    for _ in 1..k {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in min_d.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target at the very end of the mass
            pick.unwrap_or_else(|| min_d.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // every point coincides with a centre; take the first unused one
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        let c = row(pick).to_vec();
        min_d
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = d.min(sq_dist(row(i), &c)));
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Lloyd's algorithm over `points` (`N * dim`, row-major) with k-means++
/// seeding from `seed`. Empty clusters are re-seeded from the point farthest
/// from its centre. Stops when assignments stop changing or after
/// `iterations` rounds; centroids are unit-normalized at the end and points
/// re-assigned to the nearest normalized centroid.
pub fn kmeans(points: &[f32], dim: usize, k: usize, iterations: usize, seed: u64) -> Result<KMeans> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidConfig("points are not a whole number of rows".into()));
    }
    let n = points.len() / dim;
    if n == 0 {
        return Err(Error::InvalidConfig("k-means needs at least one point".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("centroid count {k} must lie in [1, {n}]")));
    }
    if iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be positive".into()));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, dim, k, &mut rng);
    let mut assignments = vec![u32::MAX; n];
    let mut rounds = 0;

    for _ in 0..iterations {
        rounds += 1;
        let nearest: Vec<(u32, f64)> = (0..n)
            .into_par_iter()
            .map(|i| l2_nearest(row(i), &centroids, dim))
            .collect();
        let changed = nearest.iter().zip(&assignments).any(|((c, _), a)| c != a);
        for (a, (c, _)) in assignments.iter_mut().zip(&nearest) {
            *a = *c;
        }
        if !changed {
            break;
        }

        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c as usize] += 1;
            for (s, &x) in sums[c as usize * dim..(c as usize + 1) * dim].iter_mut().zip(row(i)) {
                *s += x as f64;
            }
        }
        let mut dist: Vec<f64> = nearest.iter().map(|(_, d)| *d).collect();
        for c in 0..k {
            let out = &mut centroids[c * dim..(c + 1) * dim];
            if counts[c] > 0 {
                for (o, s) in out.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *o = (*s / counts[c] as f64) as f32;
                }
            } else {
                let far = dist
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
                    .0;
                dist[far] = f64::NEG_INFINITY;
                out.copy_from_slice(row(far));
            }
        }
    }

    for c in 0..k {
        let out = &mut centroids[c * dim..(c + 1) * dim];
        let norm = dot(out, out).sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v = (*v as f64 / norm) as f32);
        } else if let Some(member) = assignments.iter().position(|&a| a as usize == c) {
            out.copy_from_slice(row(member));
        }
    }
    let assignments = (0..n)
        .into_par_iter()
        .map(|i| nearest_centroid(row(i), &centroids, dim))
        .collect();

    Ok(KMeans {
        dim,
        centroids,
        assignments,
        iterations: rounds,
    })
}
