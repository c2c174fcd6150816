//! Dense vector kernels over slices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const LANES: usize = 8;

/// Inner product with a fixed eight-way accumulation order.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        for l in 0..LANES {
            acc[l] = acc[l] + a[base + l] * b[base + l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * LANES..a.len() {
        tail = tail + a[i] * b[i];
    }
    let mut sum = T::zero();
    for v in acc {
        sum = sum + v;
    }
    sum + tail
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Squared Euclidean distance, accumulated left to right.
pub fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        for l in 0..LANES {
            let d = a[base + l] - b[base + l];
            acc[l] = acc[l] + d * d;
        }
    }
    let mut tail = T::zero();
    for i in chunks * LANES..a.len() {
        let d = a[i] - b[i];
        tail = tail + d * d;
    }
    let mut sum = T::zero();
    for v in acc {
        sum = sum + v;
    }
    sum + tail
}

/// Cosine similarity; `None` when either vector is all zeros.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Option<T> {
    let na = norm(a);
    let nb = norm(b);
    if na == T::zero() || nb == T::zero() {
        return None;
    }
    let c = dot(a, b) / (na * nb);
    Some(c.max(-T::one()).min(T::one()))
}

pub fn check_dim(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Returns an L2-normalized copy, or `None` for a zero vector.
pub fn normalized<T: Scalar>(a: &[T]) -> Option<Vec<T>> {
    let n = norm(a);
    if n == T::zero() || !n.is_finite() {
        return None;
    }
    Some(a.iter().map(|&v| v / n).collect())
}

/// Arithmetic mean of equally sized rows.
pub fn mean_of<'a, T: Scalar>(rows: impl IntoIterator<Item = &'a [T]>, dim: usize) -> Option<Vec<T>> {
    let mut acc = vec![0.0f64; dim];
    let mut n = 0usize;
    for row in rows {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v.as_f64();
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    Some(acc.into_iter().map(|a| T::of(a / n as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_on_odd_lengths() {
        let a: Vec<f64> = (0..19).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..19).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((sq_dist(&a, &b) - d).abs() < 1e-9);
    }

    #[test]
    fn cosine_of_zero_is_none() {
        assert_eq!(cosine(&[0.0f32, 0.0], &[1.0, 0.0]), None);
        assert_eq!(cosine(&[2.0f32, 0.0], &[1.0, 0.0]), Some(1.0));
    }
}
