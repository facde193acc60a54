//! Lloyd's k-means with seeded farthest-point initialization, used to give
//! every positive example a dedicated prototype.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Matrix,
    /// Cluster index of every input row.
    pub labels: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &Matrix, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.row_iter().enumerate() {
        let d = sq_dist(center, x);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Clusters the rows of `points` into `clusters` groups.
///
/// The first center is a seeded uniform pick; each further center is the
/// point farthest from those already chosen (lowest index on ties).
pub fn kmeans(points: &Matrix, clusters: usize, max_iter: usize, seed: u64) -> Result<Clustering> {
    let (count, dim) = points.shape();
    if count == 0 {
        return Err(Error::Empty("no points to cluster"));
    }
    if clusters == 0 || clusters > count {
        return Err(Error::param(
            "clusters",
            alloc::format!("{clusters} clusters requested for {count} points"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = (rng.next_u64() % count as u64) as usize;
    let mut centers = Matrix::zeros(clusters, dim);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut min_d: Vec<f64> = points.row_iter().map(|x| sq_dist(x, points.row(first))).collect();
    for c in 1..clusters {
        let mut far = 0;
        for i in 1..count {
            if min_d[i] > min_d[far] {
                far = i;
            }
        }
        centers.row_mut(c).copy_from_slice(points.row(far));
        for (i, x) in points.row_iter().enumerate() {
            min_d[i] = min_d[i].min(sq_dist(x, points.row(far)));
        }
    }

    let mut labels: Vec<usize> = points.row_iter().map(|x| nearest(&centers, x)).collect();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = Matrix::zeros(clusters, dim);
        let mut sizes = vec![0usize; clusters];
        for (x, &l) in points.row_iter().zip(&labels) {
            sizes[l] += 1;
            for (s, v) in sums.row_mut(l).iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..clusters {
            // an emptied cluster keeps its previous center
            if sizes[c] > 0 {
                let inv = 1.0 / sizes[c] as f64;
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        let next: Vec<usize> = points.row_iter().map(|x| nearest(&centers, x)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(Clustering {
        centers,
        labels,
        iterations,
    })
}
