//! Seeded Lloyd k-means for prototype selection.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BiometricError;

const MAX_ITERATIONS: usize = 100;

/// One k-means cluster: its centroid, which input points belong to it, and
/// the average member-to-centroid Euclidean distance (the RBF width input).
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub centroid: Vec<f64>,
    pub member_indices: Vec<usize>,
    /// Mean Euclidean distance of members to the centroid; 0.0 for empty or
    /// single-point clusters.
    pub sigma_avg: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd k-means with k-means++ seeding, deterministic for a given seed.
///
/// Runs to an assignment fixed point or 100 iterations. Assignment ties go
/// to the lowest cluster index. A cluster left empty after an update is
/// re-seeded with the farthest point of the largest cluster.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Cluster>, BiometricError> {
    if k == 0 {
        return Err(BiometricError::ZeroK);
    }
    if points.len() < k {
        return Err(BiometricError::NotEnoughPoints { need: k, got: points.len() });
    }
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(BiometricError::DimensionMismatch { expected: dim, got: p.len() });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding: first centroid uniform, the rest D^2-weighted.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points.choose(&mut rng).expect("non-empty").clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let weighted = WeightedIndex::new(&d2).expect("positive total weight");
            points[weighted.sample(&mut rng)].clone()
        } else {
            // All remaining mass at existing centroids; any point works.
            points.choose(&mut rng).expect("non-empty").clone()
        };
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(sq_dist(p, &next));
        }
        centroids.push(next);
    }

    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERATIONS {
        // Assign: nearest centroid, ties to the lowest index.
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = sq_dist(p, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }

        // Update: centroid = member mean.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in &mut sums[c] {
                    *s /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
        }

        // Re-seed empty clusters from the farthest point of the largest one.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let largest = (0..k).max_by_key(|&j| counts[j]).expect("k >= 1");
            if counts[largest] == 0 {
                continue;
            }
            let farthest = (0..points.len())
                .filter(|&i| assignment[i] == largest)
                .max_by(|&a, &b| {
                    sq_dist(&points[a], &centroids[largest])
                        .partial_cmp(&sq_dist(&points[b], &centroids[largest]))
                        .expect("finite distances")
                })
                .expect("largest cluster is non-empty");
            centroids[c] = points[farthest].clone();
        }
    }

    // Materialize clusters from the final assignment.
    let mut clusters: Vec<Cluster> = centroids
        .into_iter()
        .map(|centroid| Cluster { centroid, member_indices: Vec::new(), sigma_avg: 0.0 })
        .collect();
    for (i, &c) in assignment.iter().enumerate() {
        clusters[c].member_indices.push(i);
    }
    for cluster in &mut clusters {
        if !cluster.member_indices.is_empty() {
            cluster.sigma_avg = cluster
                .member_indices
                .iter()
                .map(|&i| sq_dist(&points[i], &cluster.centroid).sqrt())
                .sum::<f64>()
                / cluster.member_indices.len() as f64;
        }
    }
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_well_separated_clouds_find_the_cloud_means() {
        let points = vec![
            vec![0.0, 0.0],
            vec![0.2, 0.0],
            vec![0.1, 0.2],
            vec![10.0, 10.0],
            vec![10.2, 10.0],
            vec![10.1, 10.2],
        ];
        // Brute force over all 2^6 assignments: the optimal SSE partition.
        let mut best = (f64::INFINITY, 0u32);
        for mask in 0u32..64 {
            let groups: [Vec<usize>; 2] = {
                let mut g = [Vec::new(), Vec::new()];
                for i in 0..6 {
                    g[((mask >> i) & 1) as usize].push(i);
                }
                g
            };
            if groups[0].is_empty() || groups[1].is_empty() {
                continue;
            }
            let mut sse = 0.0;
            for g in &groups {
                let mut mean = vec![0.0; 2];
                for &i in g {
                    mean[0] += points[i][0];
                    mean[1] += points[i][1];
                }
                mean[0] /= g.len() as f64;
                mean[1] /= g.len() as f64;
                for &i in g {
                    sse += sq_dist(&points[i], &mean);
                }
            }
            if sse < best.0 {
                best = (sse, mask);
            }
        }
        // The oracle's best split is the two clouds.
        assert!(best.1 == 0b111000 || best.1 == 0b000111, "mask = {:b}", best.1);
        let expected_a = vec![0.1, 0.2 / 3.0];
        let expected_b = vec![10.1, 10.0 + 0.2 / 3.0];

        let clusters = kmeans(&points, 2, 7).unwrap();
        let mut centroids: Vec<Vec<f64>> = clusters.iter().map(|c| c.centroid.clone()).collect();
        centroids.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        for (got, want) in centroids[0].iter().zip(&expected_a) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in centroids[1].iter().zip(&expected_b) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_avg_is_the_mean_member_distance() {
        // Distances to the mean (0,0): {1, 1, 3, 3} -> sigma_avg = 2.
        let points = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 3.0],
            vec![0.0, -3.0],
        ];
        let clusters = kmeans(&points, 1, 0).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].centroid, vec![0.0, 0.0]);
        assert_eq!(clusters[0].sigma_avg, 2.0);
        assert_eq!(clusters[0].member_indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let points: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.7).sin() * 5.0, (i as f64 * 1.3).cos() * 5.0])
            .collect();
        let a = kmeans(&points, 5, 42).unwrap();
        let b = kmeans(&points, 5, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_point_is_assigned_exactly_once() {
        let points: Vec<Vec<f64>> =
            (0..25).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let clusters = kmeans(&points, 4, 1).unwrap();
        let mut seen = vec![false; points.len()];
        for c in &clusters {
            for &i in &c.member_indices {
                assert!(!seen[i], "point {i} in two clusters");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn rejects_bad_arguments() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(matches!(kmeans(&points, 0, 0), Err(BiometricError::ZeroK)));
        assert!(matches!(
            kmeans(&points, 3, 0),
            Err(BiometricError::NotEnoughPoints { need: 3, got: 2 })
        ));
        let ragged = vec![vec![0.0], vec![1.0, 2.0]];
        assert!(matches!(kmeans(&ragged, 1, 0), Err(BiometricError::DimensionMismatch { .. })));
    }

    #[test]
    fn duplicate_heavy_data_still_terminates_with_k_clusters() {
        let mut points = vec![vec![0.0, 0.0]; 5];
        points.extend(vec![vec![10.0, 10.0]; 5]);
        let clusters = kmeans(&points, 3, 9).unwrap();
        assert_eq!(clusters.len(), 3);
        let assigned: usize = clusters.iter().map(|c| c.member_indices.len()).sum();
        assert_eq!(assigned, 10);
    }
}
