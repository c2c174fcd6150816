use crate::error::Result;
use crate::scalar::Scalar;
use crate::vecmath::{check_dim, dot, norm};

/// Reconstruction loss `1 - cos(f_hat, f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineLoss<T> {
    pub value: T,
    /// Set when either vector is all zeros; `value` is then 1.
    pub degenerate: bool,
}

pub fn cosine_loss<T: Scalar>(f_hat: &[T], f: &[T]) -> Result<CosineLoss<T>> {
    check_dim("cosine_loss", f.len(), f_hat.len())?;
    let na = norm(f_hat);
    let nb = norm(f);
    if na == T::zero() || nb == T::zero() {
        return Ok(CosineLoss {
            value: T::one(),
            degenerate: true,
        });
    }
    let cos = (dot(f_hat, f) / (na * nb)).max(-T::one()).min(T::one());
    Ok(CosineLoss {
        value: T::one() - cos,
        degenerate: false,
    })
}

/// Loss and its gradient with respect to `f_hat`; zero gradient when degenerate.
pub fn cosine_loss_grad<T: Scalar>(f_hat: &[T], f: &[T], grad: &mut [T]) -> T {
    let na = norm(f_hat);
    let nb = norm(f);
    if na == T::zero() || nb == T::zero() {
        grad.iter_mut().for_each(|g| *g = T::zero());
        return T::one();
    }
    let d = dot(f_hat, f);
    let inv = T::one() / (na * nb);
    let cos = d * inv;
    let k = cos / (na * na);
    for ((g, &y), &x) in grad.iter_mut().zip(f_hat).zip(f) {
        *g = -(x * inv - k * y);
    }
    T::one() - cos
}
