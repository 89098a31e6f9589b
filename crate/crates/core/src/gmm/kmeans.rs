use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Point;

/// Lloyd's k-means with k-means++ seeding on per-dimension standardized
/// data. Returns the cluster index of every point.
///
/// Standardizing makes the partition invariant to affine rescaling of
/// either coordinate.
pub fn kmeans_pp(data: &[Point], k: usize, iterations: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.len();
    assert!(k >= 1 && n >= k, "kmeans_pp needs 1 <= k <= n");
    let z = standardize(data);

    let mut centers: Vec<Point> = Vec::with_capacity(k);
    centers.push(z[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = z.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = z[next];
        for (d, p) in d2.iter_mut().zip(&z) {
            *d = d.min(dist2(p, &c));
        }
        centers.push(c);
    }

    let mut labels = vec![0usize; n];
    for _ in 0..iterations {
        let mut changed = false;
        for (label, p) in labels.iter_mut().zip(&z) {
            let best = nearest(p, &centers);
            if best != *label {
                *label = best;
                changed = true;
            }
        }
        let mut sums = vec![[0.0f64; 3]; k];
        for (label, p) in labels.iter().zip(&z) {
            sums[*label][0] += p[0];
            sums[*label][1] += p[1];
            sums[*label][2] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                *c = [s[0] / s[2], s[1] / s[2]];
            }
        }
        if !changed {
            break;
        }
    }
    for (label, p) in labels.iter_mut().zip(&z) {
        *label = nearest(p, &centers);
    }
    labels
}

fn standardize(data: &[Point]) -> Vec<Point> {
    let n = data.len() as f64;
    let mut mean = [0.0; 2];
    for p in data {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean = [mean[0] / n, mean[1] / n];
    let mut var = [0.0; 2];
    for p in data {
        var[0] += (p[0] - mean[0]).powi(2);
        var[1] += (p[1] - mean[1]).powi(2);
    }
    let scale = var.map(|v| {
        let s = (v / n).sqrt();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    });
    data.iter().map(|p| [(p[0] - mean[0]) / scale[0], (p[1] - mean[1]) / scale[1]]).collect()
}

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: &Point, centers: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}
