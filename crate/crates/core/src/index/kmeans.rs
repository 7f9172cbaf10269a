//! Seeded spherical k-means.
//!
//! Points are assumed L2-normalized (zero vectors allowed). Assignment is by
//! maximum cosine, i.e. maximum dot product with unit centroids; ties go to
//! the lowest cluster index so the result is a pure function of the inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Unit vector in the direction of `v`, or the first basis vector when `v`
/// has no direction.
fn unit_or_basis(v: &[f64]) -> Vec<f64> {
    let n = normalized(v);
    if n.iter().any(|&x| x != 0.0) {
        n
    } else {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        e
    }
}

pub fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let s = dot(point, centroid);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best
}

/// k-means++ seeding on the sphere; the sampling weight `1 - max cos` is
/// proportional to the squared chord distance to the nearest chosen center.
fn init_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;
    let mut best_cos: Vec<f64> = points.iter().map(|p| dot(p, &points[first])).collect();

    while chosen.len() < k {
        let weights: Vec<f64> = best_cos
            .iter()
            .zip(&is_chosen)
            .map(|(&c, &taken)| if taken { 0.0 } else { (1.0 - c).max(0.0) })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if r < w {
                    break;
                }
                r -= w;
            }
            pick.expect("positive total weight")
        } else {
            // every remaining point duplicates a chosen direction
            let free: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        is_chosen[next] = true;
        for (bc, p) in best_cos.iter_mut().zip(points) {
            *bc = bc.max(dot(p, &points[next]));
        }
    }
    chosen
}

/// Moves the worst-fitting member of the largest cluster into each empty one.
fn repair_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let (largest, &largest_size) = sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("k >= 1");
        if largest_size < 2 {
            return;
        }
        let mut worst = None;
        let mut worst_cos = f64::INFINITY;
        for (i, &a) in assignments.iter().enumerate() {
            if a != largest {
                continue;
            }
            let c = dot(&points[i], &centroids[largest]);
            if c < worst_cos {
                worst_cos = c;
                worst = Some(i);
            }
        }
        let worst = worst.expect("largest cluster has members");
        assignments[worst] = empty;
        centroids[empty] = unit_or_basis(&points[worst]);
    }
}

fn update_centroids(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &[usize]) {
    let dim = centroids[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (c, s) in centroids.iter_mut().zip(&sums) {
        let n = normalized(s);
        if n.iter().any(|&x| x != 0.0) {
            *c = n;
        }
    }
}

/// Clusters `points` (unit or zero vectors) into exactly `k` non-empty
/// groups, `1 <= k <= points.len()`.
pub fn spherical_kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Clustering {
    assert!(k >= 1 && k <= points.len(), "k must be within 1..=n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = init_plus_plus(points, k, &mut rng)
        .into_iter()
        .map(|i| unit_or_basis(&points[i]))
        .collect();

    let mut assignments: Vec<usize> = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let mut next: Vec<usize> = points.iter().map(|p| nearest_centroid(p, &centroids)).collect();
        repair_empty(points, &mut centroids, &mut next);
        let changed = next != assignments;
        assignments = next;
        update_centroids(points, &mut centroids, &assignments);
        if !changed {
            break;
        }
    }
    Clustering {
        centroids,
        assignments,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, per_blob: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let centers = [[10.0, 0.0], [0.0, 10.0]];
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (label, c) in centers.iter().enumerate() {
            for _ in 0..per_blob {
                pts.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
                labels.push(label);
            }
        }
        (pts, labels)
    }

    #[test]
    fn two_blobs_are_separated() {
        let (raw, labels) = blobs(11, 60);
        let pts: Vec<Vec<f64>> = raw.iter().map(|p| normalized(p)).collect();
        let c = spherical_kmeans(&pts, 2, 42, 50);

        // purity: every cluster holds points of a single blob
        for cluster in 0..2 {
            let members: Vec<usize> = (0..pts.len()).filter(|&i| c.assignments[i] == cluster).collect();
            assert!(!members.is_empty());
            let first = labels[members[0]];
            assert!(members.iter().all(|&i| labels[i] == first));
        }
        // brute force: each assignment is the argmax cosine over final centroids
        for (i, p) in pts.iter().enumerate() {
            let scores: Vec<f64> = c.centroids.iter().map(|cen| p[0] * cen[0] + p[1] * cen[1]).collect();
            let best = if scores[1] > scores[0] { 1 } else { 0 };
            assert_eq!(c.assignments[i], best);
        }
    }

    #[test]
    fn singleton_clusters_when_k_equals_n() {
        let pts: Vec<Vec<f64>> = (0..7)
            .map(|i| {
                let a = i as f64 * 0.4;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let c = spherical_kmeans(&pts, 7, 3, 20);
        let mut seen = c.assignments.clone();
        seen.sort();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let pts = vec![vec![1.0, 0.0]; 5];
        let c = spherical_kmeans(&pts, 3, 9, 10);
        let mut sizes = [0; 3];
        for &a in &c.assignments {
            sizes[a] += 1;
        }
        assert!(sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn deterministic_for_seed() {
        let (raw, _) = blobs(5, 30);
        let pts: Vec<Vec<f64>> = raw.iter().map(|p| normalized(p)).collect();
        assert_eq!(spherical_kmeans(&pts, 4, 1, 30), spherical_kmeans(&pts, 4, 1, 30));
    }

    #[test]
    fn centroids_are_unit() {
        let pts = [vec![0.0, 0.0], vec![3.0, 4.0], vec![0.0, 0.0]]
            .iter()
            .map(|p| normalized(p))
            .collect::<Vec<_>>();
        let c = spherical_kmeans(&pts, 2, 0, 10);
        for cen in &c.centroids {
            assert!((dot(cen, cen).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}
