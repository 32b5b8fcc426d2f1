//! k-means++ seeding followed by Lloyd iterations, used to initialize EM.

use rand::Rng;

use crate::linalg::Vector;

fn sq_dist(a: &Vector, b: &Vector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &Vector, centers: &[Vector]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// D²-weighted seeding.
pub fn seed_centers<R: Rng + ?Sized>(points: &[Vector], k: usize, rng: &mut R) -> Vec<Vector> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&d| {
                    acc += d;
                    u < acc
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn fill_empty(points: &[Vector], centers: &mut [Vector], labels: &mut [usize], counts: &mut [usize]) {
    // Empty clusters take the point farthest from its current center, among
    // clusters that can spare one.
    for c in 0..centers.len() {
        if counts[c] > 0 {
            continue;
        }
        let far = (0..points.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                sq_dist(&points[a], &centers[labels[a]])
                    .total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                    .then(b.cmp(&a))
            });
        if let Some(far) = far {
            counts[labels[far]] -= 1;
            labels[far] = c;
            counts[c] = 1;
            centers[c] = points[far].clone();
        }
    }
}

fn counts_of(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Cluster labels after k-means++ seeding and up to `max_iters` Lloyd steps.
/// Every cluster is non-empty whenever there are at least `k` points.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vector], k: usize, max_iters: usize, rng: &mut R) -> Vec<usize> {
    let mut centers = seed_centers(points, k, rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
    let dim = points[0].len();
    for _ in 0..max_iters {
        let mut sums = vec![Vector::zeros(dim); k];
        let mut counts = counts_of(&labels, k);
        for (p, &l) in points.iter().zip(&labels) {
            sums[l] += p;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = &sums[c] / counts[c] as f64;
            }
        }
        fill_empty(points, &mut centers, &mut labels, &mut counts);
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let mut counts = counts_of(&labels, k);
    fill_empty(points, &mut centers, &mut labels, &mut counts);
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separates_obvious_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = Vec::new();
        for c in 0..3 {
            for _ in 0..50 {
                pts.push(Vector::from_fn(2, |i, _| 10.0 * c as f64 + i as f64 + rng.random_range(-0.5..0.5)));
            }
        }
        let labels = kmeans(&pts, 3, 50, &mut rng);
        for c in 0..3 {
            let block = &labels[c * 50..(c + 1) * 50];
            assert!(block.iter().all(|&l| l == block[0]));
        }
        assert_ne!(labels[0], labels[50]);
        assert_ne!(labels[50], labels[100]);
    }

    #[test]
    fn every_cluster_non_empty_with_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vector> = (0..10).map(|i| Vector::from_element(2, (i / 5) as f64)).collect();
        let labels = kmeans(&pts, 3, 10, &mut rng);
        for c in 0..3 {
            assert!(labels.contains(&c));
        }
    }
}
