//! Lloyd's algorithm with k-means++ seeding over 2-D points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansFit {
    pub centroids: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Best-of-`restarts` k-means fit by within-cluster sum of squares.
/// Deterministic given the seed; restart r uses stream (seed, r).
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::config(format!(
            "k = {k} exceeds the {} available points",
            points.len()
        )));
    }
    let restarts = restarts.max(1);
    let mut best: Option<KMeansFit> = None;
    for run in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run as u64);
        let fit = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| fit.wcss < b.wcss) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

fn lloyd(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> KMeansFit {
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignments = vec![0usize; points.len()];
    let mut iterations = 0;

    loop {
        iterations += 1;
        let mut changed = false;
        for (i, point) in points.iter().enumerate() {
            let nearest = nearest_centroid(*point, &centroids);
            if assignments[i] != nearest {
                assignments[i] = nearest;
                changed = true;
            }
        }

        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (point, &cluster) in points.iter().zip(&assignments) {
            sums[cluster][0] += point[0];
            sums[cluster][1] += point[1];
            counts[cluster] += 1;
        }
        for cluster in 0..k {
            if counts[cluster] == 0 {
                // Keep k clusters alive: reseed at the point farthest
                // from its current centroid.
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|(i, p), (j, q)| {
                        dist2(**p, centroids[assignments[*i]])
                            .total_cmp(&dist2(**q, centroids[assignments[*j]]))
                    })
                    .map(|(i, _)| i)
                    .expect("points are nonempty");
                centroids[cluster] = points[far];
                assignments[far] = cluster;
                changed = true;
            } else {
                centroids[cluster] = [
                    sums[cluster][0] / counts[cluster] as f64,
                    sums[cluster][1] / counts[cluster] as f64,
                ];
            }
        }

        if !changed && iterations > 1 || iterations >= MAX_ITERATIONS {
            break;
        }
    }

    let wcss = points
        .iter()
        .zip(&assignments)
        .map(|(p, &c)| dist2(*p, centroids[c]))
        .sum();
    KMeansFit {
        centroids,
        assignments,
        wcss,
        iterations,
    }
}

/// k-means++ seeding: each next centroid is drawn with probability
/// proportional to squared distance from the nearest existing one.
fn plus_plus_init(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut min_dist2: Vec<f64> = points.iter().map(|p| dist2(*p, centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = min_dist2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in min_dist2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining mass is zero (duplicate points); pick uniformly.
            rng.gen_range(0..points.len())
        };
        let centroid = points[next];
        centroids.push(centroid);
        for (i, point) in points.iter().enumerate() {
            min_dist2[i] = min_dist2[i].min(dist2(*point, centroid));
        }
    }
    centroids
}

fn nearest_centroid(point: [f64; 2], centroids: &[[f64; 2]]) -> usize {
    centroids
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| dist2(point, **a).total_cmp(&dist2(point, **b)))
        .map(|(i, _)| i)
        .expect("k >= 1")
}
