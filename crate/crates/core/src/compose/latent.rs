use std::ops::{Add, Neg, Sub};

use crate::num::Scalar;

/// Latent vector; arithmetic is componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVec<S>(pub Vec<S>);

impl<S: Scalar> LatentVec<S> {
    pub fn zeros(dim: usize) -> Self {
        LatentVec(vec![S::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn norm(&self) -> S {
        self.0.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn dist(&self, other: &Self) -> S {
        (self - other).norm()
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a - b).abs())
            .fold(S::zero(), S::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: S) -> bool {
        self.dim() == other.dim() && self.max_abs_diff(other) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

fn zip<S: Scalar>(a: &LatentVec<S>, b: &LatentVec<S>, f: impl Fn(S, S) -> S) -> LatentVec<S> {
    assert_eq!(a.dim(), b.dim(), "latent dimension mismatch");
    LatentVec(a.0.iter().zip(&b.0).map(|(&x, &y)| f(x, y)).collect())
}

impl<S: Scalar> Add for &LatentVec<S> {
    type Output = LatentVec<S>;

    fn add(self, rhs: Self) -> LatentVec<S> {
        zip(self, rhs, |x, y| x + y)
    }
}

impl<S: Scalar> Sub for &LatentVec<S> {
    type Output = LatentVec<S>;

    fn sub(self, rhs: Self) -> LatentVec<S> {
        zip(self, rhs, |x, y| x - y)
    }
}

impl<S: Scalar> Neg for &LatentVec<S> {
    type Output = LatentVec<S>;

    fn neg(self) -> LatentVec<S> {
        LatentVec(self.0.iter().map(|&x| -x).collect())
    }
}
