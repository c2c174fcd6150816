//! Seeded Lloyd k-means with k-means++ initialization and empty-cluster
//! reseeding. Shared by codebook training and index partitioning.

use ndarray::{s, ArrayView2};
use rand::Rng;

use crate::scalar::Scalar;
use crate::vecmath::{dot, sq_dist};

const BLOCK_ROWS: usize = 2048;

#[derive(Debug, Clone)]
pub struct KMeans<T> {
    /// `k x dim`, row-major.
    pub centroids: Vec<T>,
    pub assignment: Vec<u32>,
    pub iterations: usize,
    pub converged: bool,
}

/// Nearest centroid per row by `|c|^2 - 2 r.c`, lowest index on ties.
pub fn assign<T: Scalar>(data: &[T], dim: usize, centroids: &[T]) -> Vec<u32> {
    let n = data.len() / dim;
    let k = centroids.len() / dim;
    let c = ArrayView2::from_shape((k, dim), centroids).expect("centroid shape");
    let norms: Vec<T> = c.rows().into_iter().map(|r| dot(r.as_slice().unwrap(), r.as_slice().unwrap())).collect();
    let x = ArrayView2::from_shape((n, dim), data).expect("data shape");
    let two = T::one() + T::one();
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK_ROWS).min(n);
        let scores = x.slice(s![start..end, ..]).dot(&c.t());
        for row in scores.rows() {
            let mut best = 0u32;
            let mut best_d = T::infinity();
            for (j, (&sc, &cn)) in row.iter().zip(&norms).enumerate() {
                let d = cn - two * sc;
                if d < best_d {
                    best_d = d;
                    best = j as u32;
                }
            }
            out.push(best);
        }
        start = end;
    }
    out
}

/// k-means++ seeding.
pub fn init_plus_plus<T: Scalar>(data: &[T], dim: usize, k: usize, rng: &mut impl Rng) -> Vec<T> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut min_d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first)).as_f64()).collect();
    for _ in 1..k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            if min_d2[chosen] <= 0.0 {
                // rounding walked past the last positive weight
                chosen = min_d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick);
        centroids.extend_from_slice(c);
        for (i, d) in min_d2.iter_mut().enumerate() {
            let nd = sq_dist(row(i), c).as_f64();
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

/// Centroid means in fixed row order; empty clusters take a random row.
fn update<T: Scalar>(
    data: &[T],
    dim: usize,
    k: usize,
    assignment: &[u32],
    centroids: &mut [T],
    rng: &mut impl Rng,
) -> usize {
    let n = assignment.len();
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignment.iter().enumerate() {
        let a = a as usize;
        counts[a] += 1;
        let acc = &mut sums[a * dim..(a + 1) * dim];
        for (s, &v) in acc.iter_mut().zip(&data[i * dim..(i + 1) * dim]) {
            *s += v.as_f64();
        }
    }
    let mut reseeded = 0;
    for j in 0..k {
        let dst = &mut centroids[j * dim..(j + 1) * dim];
        if counts[j] == 0 {
            let r = rng.random_range(0..n);
            dst.copy_from_slice(&data[r * dim..(r + 1) * dim]);
            reseeded += 1;
        } else {
            let inv = 1.0 / counts[j] as f64;
            for (c, &s) in dst.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                *c = T::of(s * inv);
            }
        }
    }
    reseeded
}

/// Lloyd iterations until the assignment stops changing or `max_iter`.
pub fn kmeans<T: Scalar>(
    data: &[T],
    dim: usize,
    k: usize,
    max_iter: usize,
    rng: &mut impl Rng,
) -> KMeans<T> {
    let mut centroids = init_plus_plus(data, dim, k, rng);
    let mut assignment = assign(data, dim, &centroids);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        update(data, dim, k, &assignment, &mut centroids, rng);
        let next = assign(data, dim, &centroids);
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
    }
    KMeans {
        centroids,
        assignment,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn assignment_matches_direct_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dim = 5;
        let data: Vec<f64> = (0..200 * dim).map(|_| rng.random::<f64>()).collect();
        let cents: Vec<f64> = (0..7 * dim).map(|_| rng.random::<f64>()).collect();
        let fast = assign(&data, dim, &cents);
        for (i, &a) in fast.iter().enumerate() {
            let r = &data[i * dim..(i + 1) * dim];
            let best = (0..7)
                .min_by(|&x, &y| {
                    sq_dist(r, &cents[x * dim..(x + 1) * dim])
                        .total_cmp(&sq_dist(r, &cents[y * dim..(y + 1) * dim]))
                })
                .unwrap();
            assert_eq!(a as usize, best);
        }
    }

    #[test]
    fn distinct_points_are_a_fixed_point() {
        let data: Vec<f32> = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let km = kmeans(&data, 2, 4, 10, &mut rng);
        let mut cents: Vec<(i32, i32)> = km
            .centroids
            .chunks(2)
            .map(|c| (c[0] as i32, c[1] as i32))
            .collect();
        cents.sort();
        assert_eq!(cents, vec![(0, 0), (0, 1), (1, 0), (5, 5)]);
        assert!(km.converged);
    }
}
