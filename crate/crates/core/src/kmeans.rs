//! Lloyd's k-means over a flat row-major point table.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::metrics::sq_dist;

/// Clusters `n = data.len() / dim` points into `k` centroids.
///
/// Initial centers are `k` distinct random points. Empty clusters are
/// reseeded with the points farthest from their current centroid. The result
/// does not depend on how rayon schedules the assignment step.
pub(crate) fn fit<R: Rng>(
    data: &[f64],
    dim: usize,
    k: usize,
    iters: usize,
    rng: &mut R,
) -> Vec<f64> {
    let n = data.len() / dim;
    debug_assert!(n >= k && k >= 1);

    let mut centroids = Vec::with_capacity(k * dim);
    for i in index::sample(rng, n, k).iter() {
        centroids.extend_from_slice(&data[i * dim..(i + 1) * dim]);
    }

    let mut prev: Option<Vec<usize>> = None;
    for _ in 0..iters {
        let assigned: Vec<(usize, f64)> = data
            .par_chunks_exact(dim)
            .map(|p| nearest_centroid(p, &centroids, dim))
            .collect();
        let labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        if prev.as_ref() == Some(&labels) {
            break;
        }

        let mut counts = vec![0usize; k];
        let mut means = vec![0.0f64; k * dim];
        for (p, &c) in data.chunks_exact(dim).zip(&labels) {
            counts[c] += 1;
            let inv = 1.0 / counts[c] as f64;
            // Running mean keeps a cluster of identical points exactly at that point.
            for (m, v) in means[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *m += (v - *m) * inv;
            }
        }

        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let mut far: Vec<usize> = (0..n).collect();
            far.sort_by(|&a, &b| match assigned[b].1.total_cmp(&assigned[a].1) {
                Ordering::Equal => a.cmp(&b),
                o => o,
            });
            for (c, &p) in empties.iter().zip(&far) {
                means[c * dim..(c + 1) * dim].copy_from_slice(&data[p * dim..(p + 1) * dim]);
            }
            prev = None;
        } else {
            prev = Some(labels);
        }
        centroids = means;
    }
    centroids
}

fn nearest_centroid(p: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separates_two_blobs() {
        let mut data = Vec::new();
        for i in 0..20 {
            let jitter = (i as f64) * 0.01;
            data.extend_from_slice(&[-5.0 + jitter, 0.0]);
            data.extend_from_slice(&[5.0 - jitter, 1.0]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut c = fit(&data, 2, 2, 20, &mut rng);
        if c[0] > c[2] {
            c.swap(0, 2);
            c.swap(1, 3);
        }
        assert!((c[0] + 4.905).abs() < 1e-9, "{c:?}");
        assert!((c[2] - 4.905).abs() < 1e-9, "{c:?}");
        assert_eq!(c[1], 0.0);
        assert_eq!(c[3], 1.0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let data: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let a = fit(&data, 3, 7, 10, &mut ChaCha8Rng::seed_from_u64(1));
        let b = fit(&data, 3, 7, 10, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
    }
}
