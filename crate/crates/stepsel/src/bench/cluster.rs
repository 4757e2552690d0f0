//! K-means, adjusted Rand index, and silhouette for embedding evaluation.

use rand::Rng;

use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding; the best of `n_restarts`
/// seeded restarts by inertia. Deterministic per seed.
pub fn kmeans(points: &[Vec<f64>], k: usize, n_restarts: usize, seed: u64) -> KmeansResult {
    assert!(k >= 1 && k <= points.len(), "k must lie in 1..=n_points");
    let mut best: Option<KmeansResult> = None;
    for restart in 0..n_restarts.max(1) {
        let mut rng = stream(seed, &[restart as u64]);
        let result = kmeans_once(points, k, &mut rng);
        if best.as_ref().map_or(true, |b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    best.expect("at least one restart")
}

fn kmeans_once<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> KmeansResult {
    let n = points.len();
    let dim = points[0].len();

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let u: f64 = rng.gen_range(0.0..total);
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = (f64::INFINITY, 0usize);
            for (c, cen) in centroids.iter().enumerate() {
                let d = sq_dist(p, cen);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if assignments[i] != best.1 {
                assignments[i] = best.1;
                changed = true;
            }
        }
        // Recompute centroids; an empty cluster takes the point farthest
        // from its assigned centroid.
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignments[i]] += 1;
            for (s, v) in sums[assignments[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[assignments[a]])
                            .partial_cmp(&sq_dist(&points[b], &centroids[assignments[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                assignments[far] = c;
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centroids[c][j] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    KmeansResult { assignments, centroids, inertia }
}

fn choose2(n: f64) -> f64 {
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings; 0.0 when the chance-corrected
/// denominator vanishes.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0.0_f64; kb]; ka];
    for i in 0..n {
        table[a[i]][b[i]] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let sum_ij: f64 = table.iter().flatten().map(|&v| choose2(v)).sum();
    let sum_a: f64 = rows.iter().map(|&v| choose2(v)).sum();
    let sum_b: f64 = cols.iter().map(|&v| choose2(v)).sum();
    let total = choose2(n as f64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-12 {
        return 0.0;
    }
    (sum_ij - expected) / (max - expected)
}

/// Mean silhouette coefficient; singleton clusters score 0 for their point.
pub fn mean_silhouette(points: &[Vec<f64>], assignments: &[usize]) -> f64 {
    let n = points.len();
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut total = 0.0;
    for i in 0..n {
        let own = assignments[i];
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            sums[assignments[j]] += sq_dist(&points[i], &points[j]).sqrt();
            counts[assignments[j]] += 1;
        }
        // Count includes own-cluster neighbors only (i excluded).
        if counts[own] == 0 {
            continue; // singleton: silhouette 0
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

/// Permutation p-value for "ARI is larger than chance": labels `b` are
/// shuffled `n_perms` times and the achieved ARI is compared.
pub fn ari_permutation_p(a: &[usize], b: &[usize], n_perms: usize, seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    let observed = adjusted_rand_index(a, b);
    let mut shuffled = b.to_vec();
    let mut ge = 0usize;
    for rep in 0..n_perms {
        let mut rng = stream(seed, &[rep as u64]);
        shuffled.shuffle(&mut rng);
        if adjusted_rand_index(a, &shuffled) >= observed {
            ge += 1;
        }
    }
    (1 + ge) as f64 / (n_perms + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(centers: &[(f64, f64)], per: usize, spread: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = stream(seed, &[]);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, &(x, y)) in centers.iter().enumerate() {
            for _ in 0..per {
                pts.push(vec![x + rng.gen_range(-spread..spread), y + rng.gen_range(-spread..spread)]);
                labels.push(c);
            }
        }
        (pts, labels)
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let (pts, truth) = blobs(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)], 8, 0.5, 1);
        let result = kmeans(&pts, 4, 20, 2);
        assert!((adjusted_rand_index(&result.assignments, &truth) - 1.0).abs() < 1e-12);
        assert!(mean_silhouette(&pts, &result.assignments) > 0.8);
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let (pts, _) = blobs(&[(0.0, 0.0), (3.0, 3.0)], 10, 1.0, 3);
        let a = kmeans(&pts, 2, 20, 7);
        let b = kmeans(&pts, 2, 20, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn ari_identities() {
        let labels = vec![0, 0, 1, 1, 2, 2];
        assert!((adjusted_rand_index(&labels, &labels) - 1.0).abs() < 1e-12);
        // Relabeling leaves ARI at 1.
        let relabeled = vec![2, 2, 0, 0, 1, 1];
        assert!((adjusted_rand_index(&labels, &relabeled) - 1.0).abs() < 1e-12);
        // Independent labels hover near zero.
        let mut rng = stream(11, &[]);
        let a: Vec<usize> = (0..600).map(|_| rng.gen_range(0..3)).collect();
        let b: Vec<usize> = (0..600).map(|_| rng.gen_range(0..3)).collect();
        assert!(adjusted_rand_index(&a, &b).abs() < 0.05);
    }

    #[test]
    fn ari_permutation_test_separates_signal_from_noise() {
        let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let p_signal = ari_permutation_p(&truth, &truth, 199, 13);
        assert!(p_signal < 0.05, "signal p = {p_signal}");
        let mut rng = stream(14, &[]);
        let noise: Vec<usize> = (0..30).map(|_| rng.gen_range(0..3)).collect();
        let p_noise = ari_permutation_p(&truth, &noise, 199, 15);
        assert!(p_noise > 0.05, "noise p = {p_noise}");
    }
}
