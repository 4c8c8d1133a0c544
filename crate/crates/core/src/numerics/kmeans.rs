// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Lloyd's k-means with k-means++ seeding.

use rand::Rng;

use super::{Matrix, RngSeed};
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Matrix,
    /// Nearest centroid of each point under `centroids`.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
}

impl KMeansFit {
    pub fn wcss(&self) -> f64 {
        self.wcss_history.last().copied().unwrap_or(0.0)
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn kmeans_fit(points: &Matrix, k: usize, seed: RngSeed, max_iters: usize) -> Result<KMeansFit> {
    kmeans_fit_with(Exec::default(), points, k, seed, max_iters)
}

pub fn kmeans_fit_with(
    exec: Exec,
    points: &Matrix,
    k: usize,
    seed: RngSeed,
    max_iters: usize,
) -> Result<KMeansFit> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "k-means needs 1 <= k <= number of points, got k={k} with {n} points"
        )));
    }
    if max_iters == 0 {
        return Err(Error::invalid("k-means needs max_iters >= 1"));
    }

    let mut rng = seed.rng();
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignment: Vec<usize> = Vec::new();
    let mut wcss_history = Vec::new();

    for iter in 0..max_iters {
        let nearest = assign(exec, points, &centroids);
        let next: Vec<usize> = nearest.iter().map(|&(c, _)| c).collect();
        wcss_history.push(nearest.iter().map(|&(_, d)| d).sum());
        let converged = next == assignment;
        assignment = next;
        if converged || iter + 1 == max_iters {
            break;
        }
        centroids = update(points, &assignment, &nearest, k);
    }

    Ok(KMeansFit {
        centroids,
        assignment,
        wcss_history,
    })
}

fn plus_plus_init<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut best: Vec<f64> = points
        .row_iter()
        .map(|p| squared_distance(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in best.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final sum
            pick.unwrap_or_else(|| best.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // all remaining points coincide with chosen centres
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        let c = points.row(next);
        for (b, p) in best.iter_mut().zip(points.row_iter()) {
            *b = b.min(squared_distance(p, c));
        }
    }
    points.select_rows(&chosen).expect("indices in range")
}

/// Nearest centroid (ties to lowest index) and its squared distance.
fn assign(exec: Exec, points: &Matrix, centroids: &Matrix) -> Vec<(usize, f64)> {
    exec.map(points.rows(), |i| {
        let p = points.row(i);
        let mut best = (0, squared_distance(p, centroids.row(0)));
        for c in 1..centroids.rows() {
            let d = squared_distance(p, centroids.row(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    })
}

fn update(points: &Matrix, assignment: &[usize], nearest: &[(usize, f64)], k: usize) -> Matrix {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (p, &c) in points.row_iter().zip(assignment) {
        counts[c] += 1;
        for (s, x) in sums.row_mut(c).iter_mut().zip(p) {
            *s += x;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = 1.0 / count as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    // An empty cluster takes over the point farthest from its centroid.
    let mut taken = vec![false; points.rows()];
    for (c, _) in counts.iter().enumerate().filter(|(_, &count)| count == 0) {
        let far = (0..points.rows())
            .filter(|&i| !taken[i])
            .max_by(|&a, &b| {
                nearest[a]
                    .1
                    .total_cmp(&nearest[b].1)
                    .then_with(|| b.cmp(&a))
            })
            .expect("k <= n leaves a free point");
        taken[far] = true;
        sums.row_mut(c).copy_from_slice(points.row(far));
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two_clouds() -> Matrix {
        let mut rng = RngSeed(1).rng();
        let mut rows = Vec::new();
        for centre in [[0.0, 0.0], [10.0, 10.0]] {
            for _ in 0..20 {
                rows.push([
                    centre[0] + rng.random_range(-0.01..0.01),
                    centre[1] + rng.random_range(-0.01..0.01),
                ]);
            }
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn separates_two_clouds() {
        let fit = kmeans_fit(&two_clouds(), 2, RngSeed(0), 50).unwrap();
        let mut cs: Vec<[f64; 2]> = fit.centroids.row_iter().map(|r| [r[0], r[1]]).collect();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (c, target) in cs.iter().zip([[0.0, 0.0], [10.0, 10.0]]) {
            assert!((c[0] - target[0]).abs() < 0.05 && (c[1] - target[1]).abs() < 0.05);
        }
    }

    #[test]
    fn k_equal_n_has_zero_wcss() {
        let pts = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [5.0, -1.0], [4.0, 4.0]]).unwrap();
        let fit = kmeans_fit(&pts, 4, RngSeed(3), 10).unwrap();
        assert_eq!(fit.wcss(), 0.0);
        let mut seen = fit.assignment.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn deterministic_given_seed() {
        let pts = two_clouds();
        let a = kmeans_fit(&pts, 3, RngSeed(8), 20).unwrap();
        let b = kmeans_fit(&pts, 3, RngSeed(8), 20).unwrap();
        assert_eq!(a, b);
        let c = kmeans_fit_with(Exec::Sequential, &pts, 3, RngSeed(8), 20).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn wcss_never_increases() {
        for seed in 0..20 {
            let mut rng = RngSeed(seed).rng();
            let pts = Matrix::uniform(60, 3, 1.0, &mut rng);
            let fit = kmeans_fit(&pts, 7, RngSeed(seed), 100).unwrap();
            for w in fit.wcss_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", fit.wcss_history);
            }
        }
    }

    #[test]
    fn empty_cluster_takes_farthest_point() {
        let pts = Matrix::from_rows(&[[0.0], [0.1], [5.0]]).unwrap();
        let nearest = [(0, 0.0), (0, 0.01), (0, 25.0)];
        let cs = update(&pts, &[0, 0, 0], &nearest, 2);
        assert_eq!(cs.row(1), &[5.0]);
    }

    #[test]
    fn rejects_bad_k() {
        let pts = Matrix::zeros(2, 2);
        assert!(kmeans_fit(&pts, 3, RngSeed(0), 5).is_err());
        assert!(kmeans_fit(&pts, 0, RngSeed(0), 5).is_err());
        assert!(kmeans_fit(&pts, 1, RngSeed(0), 0).is_err());
    }
}
